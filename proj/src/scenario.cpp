#include "rismap/scenario.hpp"

namespace rismap {

Scenario Scenario::defaults() {
  Scenario s;
  s.ris.position = Vec3(30.0, 0.0, 20.0);
  s.ris.rotation = Mat3::Identity();  // wall-mounted, normal along +x
  return s;
}

}  // namespace rismap
