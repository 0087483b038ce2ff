#include "paperprint/rng.hpp"

namespace paperprint {

Grid white_noise(std::size_t rows, std::size_t cols, double stddev, std::uint64_t seed)
{
    Grid out(rows, cols);
    if (stddev == 0.0)
        return out;
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : out.values())
        v = dist(rng);
    return out;
}

} // namespace paperprint
