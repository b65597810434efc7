#pragma once

#include "common.hpp"
#include "solver.hpp"
#include "triangulation.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mlift {

// Raw float32 raster with a text sidecar header (<payload>.hdr). Row-major,
// channel-interleaved, little-endian payload.
struct Raster {
    int width = 0, height = 0, channels = 1;
    std::vector<float> data;

    float& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

inline std::string raster_header_path(const std::string& payload_path) { return payload_path + ".hdr"; }

inline void write_raster(const std::string& path, const Raster& r) {
    if (r.data.size() != static_cast<std::size_t>(r.width) * r.height * r.channels)
        throw io_error("write_raster: payload size mismatch");
    std::ofstream hdr(raster_header_path(path));
    if (!hdr) throw io_error("write_raster: cannot open " + raster_header_path(path));
    hdr << "width: " << r.width << "\nheight: " << r.height << "\nchannels: " << r.channels
        << "\ndtype: f32\norder: row-major\n";
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw io_error("write_raster: cannot open " + path);
    bin.write(reinterpret_cast<const char*>(r.data.data()),
              static_cast<std::streamsize>(r.data.size() * sizeof(float)));
}

inline Raster read_raster(const std::string& path) {
    std::ifstream hdr(raster_header_path(path));
    if (!hdr) throw io_error("read_raster: cannot open " + raster_header_path(path));
    Raster r;
    std::string line;
    std::string dtype = "f32";
    while (std::getline(hdr, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "width:") ss >> r.width;
        else if (key == "height:") ss >> r.height;
        else if (key == "channels:") ss >> r.channels;
        else if (key == "dtype:") ss >> dtype;
    }
    if (dtype != "f32") throw io_error("read_raster: unsupported dtype " + dtype);
    if (r.width <= 0 || r.height <= 0 || r.channels <= 0) throw io_error("read_raster: bad header");
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw io_error("read_raster: cannot open " + path);
    r.data.resize(static_cast<std::size_t>(r.width) * r.height * r.channels);
    bin.read(reinterpret_cast<char*>(r.data.data()),
             static_cast<std::streamsize>(r.data.size() * sizeof(float)));
    if (static_cast<std::size_t>(bin.gcount()) != r.data.size() * sizeof(float))
        throw io_error("read_raster: payload truncated");
    return r;
}

// Delimiter-separated text signal: one row per sample, columns = embedding
// coordinates.
inline void write_signal(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw io_error("write_signal: cannot open " + path);
    char buf[64];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
}

inline Eigen::MatrixXd read_signal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_signal: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ss(line);
        std::vector<double> row;
        double val;
        while (ss >> val) row.push_back(val);
        if (row.empty()) continue;
        if (!rows.empty() && rows.front().size() != row.size())
            throw io_error("read_signal: inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error("read_signal: empty file");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            if (!std::isfinite(rows[i][j])) throw io_error("read_signal: non-finite entry");
            m(i, j) = rows[i][j];
        }
    return m;
}

inline void write_pgm(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pix) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_pgm: cannot open " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
}

// ASCII PLY export. Surfaces (s <= 2) list faces/edges directly; tetrahedral
// meshes list their unique triangles and write a tetrahedron adjacency list
// into a sidecar "<path>.adj" file.
inline void export_ply(const std::string& path, const Triangulation& tri) {
    std::ofstream out(path);
    if (!out) throw io_error("export_ply: cannot open " + path);
    const int L = tri.num_vertices(), n = tri.ndim(), s = tri.sdim();
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << L << "\n";
    const char* names[4] = {"x", "y", "z", "w"};
    for (int i = 0; i < n; ++i) out << "property double " << names[i] << "\n";
    if (s == 1) {
        out << "element edge " << tri.num_simplices() << "\n";
        out << "property int vertex1\nproperty int vertex2\n";
    } else if (s == 2) {
        out << "element face " << tri.num_simplices() << "\n";
        out << "property list uchar int vertex_indices\n";
    } else {
        std::set<std::array<int, 3>> faces;
        for (const auto& sx : tri.simplices)
            for (int drop = 0; drop < 4; ++drop) {
                std::array<int, 3> f;
                int k = 0;
                for (int i = 0; i < 4; ++i)
                    if (i != drop) f[k++] = sx[i];
                std::sort(f.begin(), f.end());
                faces.insert(f);
            }
        out << "element face " << faces.size() << "\n";
        out << "property list uchar int vertex_indices\n";
        out << "end_header\n";
        for (int k = 0; k < L; ++k) {
            for (int i = 0; i < n; ++i) out << (i ? " " : "") << tri.vertices(k, i);
            out << "\n";
        }
        for (const auto& f : faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";

        // tetrahedra + neighbor list sidecar
        std::map<std::array<int, 3>, std::vector<int>> incident;
        for (int t = 0; t < tri.num_simplices(); ++t)
            for (int drop = 0; drop < 4; ++drop) {
                std::array<int, 3> f;
                int k = 0;
                for (int i = 0; i < 4; ++i)
                    if (i != drop) f[k++] = tri.simplices[t][i];
                std::sort(f.begin(), f.end());
                incident[f].push_back(t);
            }
        std::ofstream adj(path + ".adj");
        if (!adj) throw io_error("export_ply: cannot open " + path + ".adj");
        for (int t = 0; t < tri.num_simplices(); ++t) {
            adj << "tet";
            for (int v : tri.simplices[t]) adj << " " << v;
            adj << " neighbors";
            std::set<int> nb;
            for (int drop = 0; drop < 4; ++drop) {
                std::array<int, 3> f;
                int k = 0;
                for (int i = 0; i < 4; ++i)
                    if (i != drop) f[k++] = tri.simplices[t][i];
                std::sort(f.begin(), f.end());
                for (int other : incident[f])
                    if (other != t) nb.insert(other);
            }
            for (int o : nb) adj << " " << o;
            adj << "\n";
        }
        return;
    }
    out << "end_header\n";
    for (int k = 0; k < L; ++k) {
        for (int i = 0; i < n; ++i) out << (i ? " " : "") << tri.vertices(k, i);
        out << "\n";
    }
    for (const auto& sx : tri.simplices) {
        if (s == 1) out << sx[0] << " " << sx[1] << "\n";
        else out << "3 " << sx[0] << " " << sx[1] << " " << sx[2] << "\n";
    }
}

// Curve on a mesh exported as a PLY polyline (vertices + edge chain).
inline void export_ply_polyline(const std::string& path, const Eigen::MatrixXd& points) {
    std::ofstream out(path);
    if (!out) throw io_error("export_ply_polyline: cannot open " + path);
    const int n = static_cast<int>(points.rows()), dim = static_cast<int>(points.cols());
    out << "ply\nformat ascii 1.0\nelement vertex " << n << "\n";
    const char* names[4] = {"x", "y", "z", "w"};
    for (int i = 0; i < dim; ++i) out << "property double " << names[i] << "\n";
    out << "element edge " << (n > 0 ? n - 1 : 0) << "\nproperty int vertex1\nproperty int vertex2\n";
    out << "end_header\n";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) out << (j ? " " : "") << points(i, j);
        out << "\n";
    }
    for (int i = 0; i + 1 < n; ++i) out << i << " " << i + 1 << "\n";
}

inline void write_diagnostics(const std::string& path, const SolveDiagnostics& diag,
                              const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::ofstream out(path);
    if (!out) throw io_error("write_diagnostics: cannot open " + path);
    out << "iterations: " << diag.iterations << "\n";
    out << "converged: " << (diag.converged ? "yes" : "no") << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", diag.primal);
    out << "primal_energy: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.12g", diag.dual);
    out << "dual_energy: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.12g", diag.gap);
    out << "relative_gap: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.12g", diag.op_norm);
    out << "operator_norm: " << buf << "\n";
    for (const auto& [k, v] : extra) out << k << ": " << v << "\n";
}

} // namespace mlift
