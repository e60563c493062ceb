#include "thyrovol/core/grid.hpp"

#include <sstream>

namespace thyrovol {

void GridGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0.0)) {
      std::ostringstream os;
      os << "grid spacing[" << a << "] must be > 0, got " << spacing[a];
      throw ConfigError(os.str());
    }
    if (dims[a] < 1) {
      std::ostringstream os;
      os << "grid dims[" << a << "] must be >= 1, got " << dims[a];
      throw ConfigError(os.str());
    }
  }
}

}  // namespace thyrovol
