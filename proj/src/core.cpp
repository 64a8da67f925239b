#include "trafficbench/core.hpp"

#include <cstdlib>
#include <fstream>

namespace tb {

int max_workers() {
    static const int cached = [] {
        int hw = 1;
#ifdef _OPENMP
        hw = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("TRAFFICBENCH_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end != env && v > 0) return static_cast<int>(v);
        }
        return hw;
    }();
    return cached;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw tb_error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw tb_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace tb
