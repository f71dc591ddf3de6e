#pragma once

#include "tgauss/errors.hpp"
#include "tgauss/tensor.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/random.hpp"
#include "tgauss/parallel.hpp"
#include "tgauss/distribution.hpp"
#include "tgauss/estimation.hpp"
#include "tgauss/multivariate.hpp"
#include "tgauss/fields.hpp"
#include "tgauss/io.hpp"
#include "tgauss/experiments.hpp"
