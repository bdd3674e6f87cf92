#include "qlab/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "qlab/errors.hpp"

namespace qlab {

Grid::Grid(int n) : n_(n), h_(0.0) {
    if (n < 8) throw std::invalid_argument("grid needs at least 8 nodes per axis");
    h_ = 2.0 / (n - 1);
}

Vec3 Grid::position(std::size_t node) const {
    const auto [i, j, k] = ijk(node);
    return position(i, j, k);
}

std::array<int, 3> Grid::ijk(std::size_t node) const {
    const auto nn = static_cast<std::size_t>(n_);
    const int k = static_cast<int>(node % nn);
    const int j = static_cast<int>((node / nn) % nn);
    const int i = static_cast<int>(node / (nn * nn));
    return {i, j, k};
}

std::pair<int, int> Grid::axis_range(double x, double r) const {
    const int lo = static_cast<int>(std::floor((x - r + 1.0) / h_));
    const int hi = static_cast<int>(std::ceil((x + r + 1.0) / h_));
    return {std::max(lo, 0), std::min(hi, n_ - 1)};
}

Ball::Ball(Vec3 c, double r) : center(c), radius(r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball radius must be positive");
}

bool Ball::contains(const Vec3& y) const {
    const double dx = y[0] - center[0];
    const double dy = y[1] - center[1];
    const double dz = y[2] - center[2];
    return dx * dx + dy * dy + dz * dz < radius * radius;
}

QField::QField(Grid g, double eps, const MaterialParams& p)
    : grid(g), data(5 * g.node_count(), 0.0), mask(g.node_count(), 0), epsilon(eps), params(p) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

std::size_t QField::free_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{0}));
}

namespace {

QTensor hedgehog_at(const Vec3& x, double s) { return uniaxial(s, x); }

double radius_of(const Vec3& x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }

template <class Fn>
void fill_faces(QField& field, Fn&& value) {
    const Grid& g = field.grid;
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int k = 0; k < g.n(); ++k) {
                if (!g.on_face(i, j, k)) continue;
                const std::size_t node = g.index(i, j, k);
                field.mask[node] = 1;
                field.set(node, value(g.position(i, j, k)));
            }
}

}  // namespace

QField hedgehog_boundary(const Grid& grid, const MaterialParams& p, double epsilon) {
    QField field(grid, epsilon, p);
    fill_faces(field, [&](const Vec3& x) { return hedgehog_at(x, p.s_star); });
    return field;
}

QField constant_boundary(const Grid& grid, const MaterialParams& p, double epsilon, const QTensor& P) {
    QField field(grid, epsilon, p);
    for (std::size_t node = 0; node < grid.node_count(); ++node) field.set(node, P);
    fill_faces(field, [&](const Vec3&) { return P; });
    return field;
}

QField hedgehog_reference(const Grid& grid, const MaterialParams& p, double core_radius, double epsilon) {
    if (!(core_radius >= 0.0)) throw std::invalid_argument("core_radius must be nonnegative");
    QField field = hedgehog_boundary(grid, p, epsilon);
    for (int i = 1; i < grid.n() - 1; ++i)
        for (int j = 1; j < grid.n() - 1; ++j)
            for (int k = 1; k < grid.n() - 1; ++k) {
                const Vec3 x = grid.position(i, j, k);
                const double rho = radius_of(x);
                if (rho == 0.0) continue;  // origin stays zero
                const double s = core_radius > 0.0 ? p.s_star * std::min(1.0, rho / core_radius) : p.s_star;
                field.set(grid.index(i, j, k), hedgehog_at(x, s));
            }
    return field;
}

double discrete_gradient_sq(const QField& field, std::size_t node) {
    const Grid& g = field.grid;
    const auto idx = g.ijk(node);
    const std::size_t stride[3] = {static_cast<std::size_t>(g.n()) * g.n(), static_cast<std::size_t>(g.n()), 1};
    const double* q = field.data.data();
    double sum = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        std::size_t a = node;
        std::size_t b = node + stride[axis];
        if (idx[axis] == g.n() - 1) {
            a = node - stride[axis];
            b = node;
        }
        for (std::size_t c = 0; c < 5; ++c) {
            const double d = q[5 * b + c] - q[5 * a + c];
            sum += d * d;
        }
    }
    return sum / (g.h() * g.h());
}

std::vector<double> energy_density(const QField& field) {
    const std::size_t count = field.grid.node_count();
    std::vector<double> e(count);
    const double inv_eps2 = 1.0 / (field.epsilon * field.epsilon);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t node = 0; node < static_cast<std::ptrdiff_t>(count); ++node) {
        const auto u = static_cast<std::size_t>(node);
        e[u] = 0.5 * discrete_gradient_sq(field, u) + inv_eps2 * bulk_potential(field.at(u), field.params);
    }
    return e;
}

std::vector<double> gradient_magnitude(const QField& field) {
    const std::size_t count = field.grid.node_count();
    std::vector<double> g(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t node = 0; node < static_cast<std::ptrdiff_t>(count); ++node)
        g[static_cast<std::size_t>(node)] = std::sqrt(discrete_gradient_sq(field, static_cast<std::size_t>(node)));
    return g;
}

double integrate_ball(const QField& field, std::span<const double> density, const Ball& ball) {
    if (density.size() != field.grid.node_count())
        throw std::invalid_argument("integrate_ball: density size does not match the grid");
    double sum = 0.0;
    std::size_t hits = 0;
    for_each_node_in(field.grid, ball, [&](std::size_t node, const Vec3&) {
        sum += density[node];
        ++hits;
    });
    if (hits == 0) throw EmptyIntersection("ball contains no grid node; radius below grid resolution");
    const double h = field.grid.h();
    return h * h * h * sum;
}

// ---------------------------------------------------------------------------
// Field files

namespace {

constexpr std::size_t kHeaderBytes = 64;

template <class T>
void put_le(std::vector<char>& buf, std::size_t offset, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(buf.data() + offset, bytes, sizeof(T));
}

template <class T>
T get_le(const std::vector<char>& buf, std::size_t offset) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, buf.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

std::vector<char> make_header(const QField& field, const char magic[4]) {
    std::vector<char> buf(kHeaderBytes, 0);
    std::memcpy(buf.data(), magic, 4);
    put_le<std::uint32_t>(buf, 4, kFieldFileVersion);
    put_le<std::uint32_t>(buf, 8, static_cast<std::uint32_t>(field.grid.n()));
    put_le<double>(buf, 16, field.grid.h());
    put_le<double>(buf, 24, field.epsilon);
    put_le<double>(buf, 32, field.params.a);
    put_le<double>(buf, 40, field.params.b);
    put_le<double>(buf, 48, field.params.c);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

void save_field(const QField& field, const std::filesystem::path& path) {
    const std::size_t count = field.grid.node_count();
    std::vector<char> buf = make_header(field, "QTNF");
    buf.resize(kHeaderBytes + count + 8 * 5 * count);
    std::memcpy(buf.data() + kHeaderBytes, field.mask.data(), count);
    const std::size_t base = kHeaderBytes + count;
    for (std::size_t i = 0; i < 5 * count; ++i) put_le<double>(buf, base + 8 * i, field.data[i]);
    write_file(path, buf);
}

QField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read from '" + path.string() + "' failed");

    if (buf.size() < kHeaderBytes) throw FormatError("field file truncated: header incomplete");
    if (std::memcmp(buf.data(), "QTNF", 4) != 0) throw FormatError("not a field file: bad magic");
    const auto version = get_le<std::uint32_t>(buf, 4);
    if (version != kFieldFileVersion)
        throw FormatError("unsupported field file version: expected " + std::to_string(kFieldFileVersion) +
                          ", found " + std::to_string(version));
    const auto n = get_le<std::uint32_t>(buf, 8);
    if (n < 8 || n > 4096) throw FormatError("field file has invalid grid size " + std::to_string(n));
    const Grid grid(static_cast<int>(n));
    const std::size_t count = grid.node_count();
    if (buf.size() != kHeaderBytes + count + 40 * count)
        throw FormatError("field file truncated: expected " + std::to_string(kHeaderBytes + 41 * count) +
                          " bytes, found " + std::to_string(buf.size()));
    if (get_le<double>(buf, 16) != grid.h()) throw FormatError("field file spacing does not match n");

    MaterialParams params;
    try {
        params = MaterialParams::make(get_le<double>(buf, 32), get_le<double>(buf, 40), get_le<double>(buf, 48));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("field file material constants: ") + e.what());
    }
    const double eps = get_le<double>(buf, 24);
    if (!(eps > 0.0)) throw FormatError("field file epsilon must be positive");

    QField field(grid, eps, params);
    std::memcpy(field.mask.data(), buf.data() + kHeaderBytes, count);
    const std::size_t base = kHeaderBytes + count;
    for (std::size_t i = 0; i < 5 * count; ++i) field.data[i] = get_le<double>(buf, base + 8 * i);
    return field;
}

void save_mask(const QField& field, std::span<const std::uint8_t> mask, const std::filesystem::path& path) {
    if (mask.size() != field.grid.node_count()) throw GridMismatch("mask size does not match the grid");
    std::vector<char> buf = make_header(field, "QTNM");
    buf.insert(buf.end(), mask.begin(), mask.end());
    write_file(path, buf);
}

}  // namespace qlab
