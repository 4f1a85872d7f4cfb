#include "ivct/parallel.hpp"
#include "ivct/tensor.hpp"

#include <cstdlib>

namespace ivct {

bool& finite_checks() {
    static bool enabled = true;
    return enabled;
}

int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("IVCT_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return cached;
}

} // namespace ivct
