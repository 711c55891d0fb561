#pragma once

#include "qaexpert/learners.hpp"

namespace qaexpert::learners::detail {

// Validates shape and finiteness and requires at least two classes.
void require_trainable(const Dataset& data);

}  // namespace qaexpert::learners::detail
