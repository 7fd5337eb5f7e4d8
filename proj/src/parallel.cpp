#include "planefilter/parallel.hpp"

#include <cstdlib>
#include <string>

namespace planefilter {

int resolve_thread_count(int requested) {
  if (requested < 0) {
    requested = 0;
    if (const char* env = std::getenv("PLANEFILTER_THREADS")) {
      try {
        requested = std::max(0, std::stoi(env));
      } catch (const std::exception&) {
        requested = 0;
      }
    }
  }
  if (requested == 0) {
    requested = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(requested, 1);
}

}  // namespace planefilter
