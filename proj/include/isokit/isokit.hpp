#pragma once

#include "isokit/error.hpp"
#include "isokit/model.hpp"
#include "isokit/kernels.hpp"
#include "isokit/combinat.hpp"
#include "isokit/moments.hpp"
#include "isokit/mgf.hpp"
#include "isokit/sample.hpp"
#include "isokit/random_models.hpp"
#include "isokit/verify.hpp"
