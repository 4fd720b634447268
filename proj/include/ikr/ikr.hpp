#pragma once

#include "ikr/bench.hpp"
#include "ikr/degradation.hpp"
#include "ikr/dense_oracle.hpp"
#include "ikr/fourier_solver.hpp"
#include "ikr/kernel.hpp"
#include "ikr/metrics.hpp"
#include "ikr/oracle_check.hpp"
#include "ikr/nets/modules.hpp"
#include "ikr/pipeline.hpp"
#include "ikr/png_io.hpp"
#include "ikr/resample.hpp"
#include "ikr/tensor.hpp"
#include "ikr/weights.hpp"
