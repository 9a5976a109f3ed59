#pragma once

#include "ztpcp/cdf.hpp"
#include "ztpcp/chain.hpp"
#include "ztpcp/checkpoint.hpp"
#include "ztpcp/commands.hpp"
#include "ztpcp/config.hpp"
#include "ztpcp/error.hpp"
#include "ztpcp/eval.hpp"
#include "ztpcp/gibbs.hpp"
#include "ztpcp/io.hpp"
#include "ztpcp/model.hpp"
#include "ztpcp/rng.hpp"
#include "ztpcp/samplers.hpp"
#include "ztpcp/split.hpp"
#include "ztpcp/synth.hpp"
#include "ztpcp/tensor.hpp"
