#pragma once

// Umbrella header.

#include "deephoyer/checkpoint.hpp"
#include "deephoyer/config.hpp"
#include "deephoyer/data.hpp"
#include "deephoyer/descent.hpp"
#include "deephoyer/errors.hpp"
#include "deephoyer/gradcheck.hpp"
#include "deephoyer/kernels.hpp"
#include "deephoyer/metrics.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/optimizer.hpp"
#include "deephoyer/pipeline.hpp"
#include "deephoyer/pruning.hpp"
#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"
#include "deephoyer/tensor.hpp"
