#pragma once

#include "rinverse/errors.hpp"
#include "rinverse/linalg.hpp"
#include "rinverse/multi_index.hpp"
#include "rinverse/jet.hpp"
#include "rinverse/expression.hpp"
#include "rinverse/quadrature.hpp"
#include "rinverse/geometry.hpp"
#include "rinverse/transforms.hpp"
#include "rinverse/smooth_function.hpp"
#include "rinverse/core_inverse.hpp"
#include "rinverse/pipeline.hpp"
#include "rinverse/serialization.hpp"
#include "rinverse/harness.hpp"
