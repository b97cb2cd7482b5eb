#pragma once

#include "tailsampler/analysis.hpp"
#include "tailsampler/errors.hpp"
#include "tailsampler/interval_set.hpp"
#include "tailsampler/models.hpp"
#include "tailsampler/mps.hpp"
#include "tailsampler/opes_sampler.hpp"
#include "tailsampler/outcome.hpp"
#include "tailsampler/random.hpp"
#include "tailsampler/report.hpp"
#include "tailsampler/standard_sampler.hpp"
#include "tailsampler/states.hpp"
#include "tailsampler/tensor.hpp"
