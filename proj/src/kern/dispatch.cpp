#include <cstdlib>
#include <string>

#include "damt/kern/kernels.hpp"

namespace damt::kern {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

struct Selection {
    const KernelTable* table;
    std::string name;
};

Selection select() {
    const char* env = std::getenv("DAMT_KERNEL_BACKEND");
    if (env) {
        const std::string want(env);
        if (want == "scalar") return {&scalar::table, "scalar"};
        if (want == "avx2" && avx2_supported()) return {&avx2::table, "avx2"};
    }
    if (avx2_supported()) return {&avx2::table, "avx2"};
    return {&scalar::table, "scalar"};
}

const Selection& selection() {
    static const Selection s = select();
    return s;
}

}  // namespace

const KernelTable& active() { return *selection().table; }
const std::string& backend_name() { return selection().name; }

}  // namespace damt::kern
