// Compares the OpenMP kernels against their serial reference twins on
// synthetic inputs and prints a throughput table.

#include "robustcov/kernels.hpp"
#include "robustcov/threading.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace robustcov;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-22s %10.3f ms %10.3f ms   speedup %.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main() {
    std::printf("threads: %d\n", effective_threads());
    std::printf("%-22s %13s %13s\n", "kernel", "serial", "openmp");
    std::mt19937_64 rng(1234);
    auto unif = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    const Eigen::Index t_obs = 2000, n = 300;
    Eigen::MatrixXd returns(t_obs, n);
    for (Eigen::Index i = 0; i < t_obs; ++i)
        for (Eigen::Index j = 0; j < n; ++j) returns(i, j) = 0.05 * (2.0 * unif() - 1.0);
    Eigen::VectorXd thresholds = Eigen::VectorXd::Constant(n, 0.01);

    {
        kernels::ExceedanceFlags flags = kernels::exceedance_flags(returns, thresholds);
        const double s = time_ms([&] { kernels::pair_counts_serial(flags); }, 5);
        const double p = time_ms([&] { kernels::pair_counts(flags); }, 5);
        report("pair_counts", s, p);
    }
    {
        Eigen::VectorXd mu = returns.colwise().mean();
        Eigen::VectorXd w = Eigen::VectorXd::Constant(t_obs, 1.0 / static_cast<double>(t_obs));
        const double s = time_ms([&] { kernels::weighted_scatter_serial(returns, mu, w); }, 5);
        const double p = time_ms([&] { kernels::weighted_scatter(returns, mu, w); }, 5);
        report("weighted_scatter", s, p);
    }
    {
        Eigen::MatrixXd points = returns.topRows(1200);
        const double s = time_ms([&] { kernels::pairwise_sq_dists_serial(points); }, 3);
        const double p = time_ms([&] { kernels::pairwise_sq_dists(points); }, 3);
        report("pairwise_sq_dists", s, p);
    }
    {
        Eigen::MatrixXd points = returns.topRows(1500);
        Eigen::MatrixXd centroids = returns.middleRows(10, 12);
        std::vector<int> labels;
        Eigen::VectorXd d2;
        const double s =
            time_ms([&] { kernels::assign_nearest_serial(points, centroids, labels, d2); }, 10);
        const double p =
            time_ms([&] { kernels::assign_nearest(points, centroids, labels, d2); }, 10);
        report("assign_nearest", s, p);
    }
    return 0;
}
