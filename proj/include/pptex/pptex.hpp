#pragma once

#include "pptex/banded_cholesky.hpp"
#include "pptex/benchmark.hpp"
#include "pptex/cache.hpp"
#include "pptex/clbp.hpp"
#include "pptex/dataset.hpp"
#include "pptex/descriptor.hpp"
#include "pptex/error.hpp"
#include "pptex/image_field.hpp"
#include "pptex/image_io.hpp"
#include "pptex/ml.hpp"
#include "pptex/model_io.hpp"
#include "pptex/parallel.hpp"
#include "pptex/pde.hpp"
