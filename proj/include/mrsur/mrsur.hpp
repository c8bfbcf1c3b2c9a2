#ifndef MRSUR_MRSUR_HPP
#define MRSUR_MRSUR_HPP

#include "mrsur/criteria.hpp"
#include "mrsur/dataset.hpp"
#include "mrsur/design.hpp"
#include "mrsur/errors.hpp"
#include "mrsur/gp_core.hpp"
#include "mrsur/harness.hpp"
#include "mrsur/inference.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/point.hpp"
#include "mrsur/rng.hpp"
#include "mrsur/special_fn.hpp"
#include "mrsur/testbeds.hpp"

#endif  // MRSUR_MRSUR_HPP
