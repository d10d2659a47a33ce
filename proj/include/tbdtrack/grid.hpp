#pragma once

#include "tbdtrack/state.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbdtrack {

/// Regular cell grid covering the region of interest. Cells are half-open
/// rectangles [lo, hi) in both axes, so every in-ROI point belongs to exactly
/// one cell. Cell indices are row-major: m = iy * nx + ix.
struct CellGrid {
    int nx = 0;
    int ny = 0;
    double cell_size = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

    CellGrid() = default;
    CellGrid(int nx_, int ny_, double cell_size_, double origin_x_ = 0.0, double origin_y_ = 0.0)
        : nx(nx_), ny(ny_), cell_size(cell_size_), origin_x(origin_x_), origin_y(origin_y_) {
        if (nx < 1 || ny < 1) throw std::invalid_argument("CellGrid: cell counts must be >= 1");
        if (!(cell_size > 0.0)) throw std::invalid_argument("CellGrid: cell_size must be > 0");
    }

    [[nodiscard]] int num_cells() const { return nx * ny; }
    [[nodiscard]] double width() const { return nx * cell_size; }
    [[nodiscard]] double height() const { return ny * cell_size; }
    [[nodiscard]] double max_x() const { return origin_x + width(); }
    [[nodiscard]] double max_y() const { return origin_y + height(); }

    /// Cell index of a position, or -1 if outside the ROI.
    [[nodiscard]] int cell_index(double px, double py) const {
        const double fx = (px - origin_x) / cell_size;
        const double fy = (py - origin_y) / cell_size;
        if (fx < 0.0 || fy < 0.0) return -1;
        const int ix = static_cast<int>(fx);
        const int iy = static_cast<int>(fy);
        if (ix >= nx || iy >= ny) return -1;
        return iy * nx + ix;
    }

    [[nodiscard]] int cell_index(const ObjectState& x) const { return cell_index(x.px, x.py); }

    [[nodiscard]] bool contains(double px, double py) const { return cell_index(px, py) >= 0; }

    [[nodiscard]] bool valid_cell(int m) const { return m >= 0 && m < num_cells(); }

    /// Center position of cell m.
    [[nodiscard]] std::pair<double, double> cell_center(int m) const {
        if (!valid_cell(m)) throw std::out_of_range("CellGrid::cell_center: invalid cell index");
        const int iy = m / nx;
        const int ix = m % nx;
        return {origin_x + (ix + 0.5) * cell_size, origin_y + (iy + 0.5) * cell_size};
    }

    bool operator==(const CellGrid& o) const {
        return nx == o.nx && ny == o.ny && cell_size == o.cell_size &&
               origin_x == o.origin_x && origin_y == o.origin_y;
    }
};

/// One sensor frame: the M scalar cell intensities for a single time step.
struct Frame {
    CellGrid grid;
    std::vector<double> z;

    Frame() = default;
    Frame(CellGrid g, std::vector<double> values) : grid(g), z(std::move(values)) {
        if (static_cast<int>(z.size()) != grid.num_cells())
            throw std::invalid_argument("Frame: intensity count does not match grid");
        for (double v : z)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("Frame: cell intensities must be finite and >= 0");
    }
};

/// Frame file format: one header line "nx,ny,cell_size,origin_x,origin_y"
/// followed by one line of M comma-separated intensities in row-major order.
inline void write_frame_csv(const Frame& frame, std::ostream& os) {
    os.precision(17);
    os << frame.grid.nx << ',' << frame.grid.ny << ',' << frame.grid.cell_size << ','
       << frame.grid.origin_x << ',' << frame.grid.origin_y << '\n';
    for (std::size_t i = 0; i < frame.z.size(); ++i) {
        if (i) os << ',';
        os << frame.z[i];
    }
    os << '\n';
}

inline void write_frame_csv(const Frame& frame, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_frame_csv: cannot open " + path);
    write_frame_csv(frame, os);
}

inline Frame read_frame_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("read_frame_csv: missing header line");
    std::istringstream hs(header);
    CellGrid grid;
    char sep = 0;
    if (!(hs >> grid.nx >> sep >> grid.ny >> sep >> grid.cell_size >> sep >> grid.origin_x >> sep >>
          grid.origin_y))
        throw std::runtime_error("read_frame_csv: malformed grid header: " + header);

    std::string values;
    if (!std::getline(is, values)) throw std::runtime_error("read_frame_csv: missing intensity line");
    std::vector<double> z;
    z.reserve(static_cast<std::size_t>(grid.num_cells()));
    std::istringstream vs(values);
    std::string token;
    while (std::getline(vs, token, ',')) z.push_back(std::stod(token));
    return Frame(grid, std::move(z));
}

inline Frame read_frame_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_frame_csv: cannot open " + path);
    return read_frame_csv(is);
}

} // namespace tbdtrack
