#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <vector>

namespace tbdtrack {

struct AssignmentResult {
    std::vector<int> row_to_col;
    double total_cost = 0.0;
};

/// Optimal assignment for a rectangular cost matrix with rows() <= cols(),
/// by shortest augmenting paths on the dual (Jonker-Volgenant style). Every
/// row is assigned to a distinct column.
inline AssignmentResult solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n > m) throw std::invalid_argument("solve_assignment: requires rows() <= cols()");
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    AssignmentResult result;
    result.row_to_col.assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) result.row_to_col[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) result.total_cost += cost(i, result.row_to_col[i]);
    return result;
}

} // namespace tbdtrack
