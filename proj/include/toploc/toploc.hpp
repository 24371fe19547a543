#pragma once

#include "toploc/domain.hpp"
#include "toploc/dotmap.hpp"
#include "toploc/grid.hpp"
#include "toploc/io.hpp"
#include "toploc/losses.hpp"
#include "toploc/metrics.hpp"
#include "toploc/optdemo.hpp"
#include "toploc/persistence.hpp"
#include "toploc/persistence_oracle.hpp"

namespace toploc {

inline constexpr const char* version = "0.1.0";

}  // namespace toploc
