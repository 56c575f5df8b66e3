#pragma once

#include "xsim/core.hpp"
#include "xsim/indexes.hpp"
#include "xsim/io/hash.hpp"
#include "xsim/io/manifest.hpp"
#include "xsim/io/npy.hpp"
#include "xsim/io/results.hpp"
#include "xsim/io/svg.hpp"
#include "xsim/pipeline.hpp"
#include "xsim/probes.hpp"
#include "xsim/synth.hpp"
#include "xsim/validate.hpp"
