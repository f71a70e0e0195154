#pragma once

// Umbrella header.

#include "esnnet/checkpoint.hpp"
#include "esnnet/common.hpp"
#include "esnnet/config.hpp"
#include "esnnet/data.hpp"
#include "esnnet/dsp.hpp"
#include "esnnet/eval.hpp"
#include "esnnet/frontend.hpp"
#include "esnnet/gradcheck.hpp"
#include "esnnet/layers.hpp"
#include "esnnet/model.hpp"
#include "esnnet/optim.hpp"
#include "esnnet/report.hpp"
#include "esnnet/reservoir.hpp"
#include "esnnet/rng.hpp"
#include "esnnet/synth.hpp"
#include "esnnet/tensor.hpp"
#include "esnnet/train.hpp"
