#include "vps/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "vps/errors.hpp"
#include "vps/format.hpp"

namespace vps {

static_assert(std::endian::native == std::endian::little, "binary field IO assumes a little-endian host");

CylGrid CylGrid::make(std::size_t Nr, std::size_t Nz, double Rmax, double Zmax)
{
    if (Nr < 4 || Nz < 4) throw DomainError("grid needs at least 4 nodes per direction");
    if (!(Rmax > 0.0) || !(Zmax > 0.0)) throw DomainError("grid extents must be positive");
    CylGrid g;
    g.Nr = Nr;
    g.Nz = Nz;
    g.dr = Rmax / static_cast<double>(Nr - 1);
    g.dz = Zmax / static_cast<double>(Nz - 1);
    return g;
}

double CylGrid::cell_area(std::size_t i, std::size_t j) const
{
    const double radial = i == 0 ? dr * dr / 8.0 : r(i) * dr;
    const double height = j == 0 ? dz / 2.0 : dz;
    return radial * height;
}

double CylGrid::cell_volume(std::size_t i, std::size_t j) const
{
    return 4.0 * M_PI * cell_area(i, j);
}

nlohmann::json to_json(const CylGrid& g)
{
    return {{"Nr", g.Nr}, {"Nz", g.Nz}, {"dr", g.dr}, {"dz", g.dz}, {"Rmax", g.Rmax()}, {"Zmax", g.Zmax()}};
}

CylGrid grid_from_json(const nlohmann::json& j)
{
    CylGrid g;
    g.Nr = j.at("Nr").get<std::size_t>();
    g.Nz = j.at("Nz").get<std::size_t>();
    g.dr = j.at("dr").get<double>();
    g.dz = j.at("dz").get<double>();
    return g;
}

std::string to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::Density: return "density";
    case FieldKind::Potential: return "potential";
    case FieldKind::EffectivePotential: return "effective-potential";
    }
    return "unknown";
}

double ScalarField::sup_abs() const
{
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double interpolate(const ScalarField& f, double r, double z)
{
    const CylGrid& g = f.grid;
    const double x = std::clamp(r / g.dr, 0.0, static_cast<double>(g.Nr - 1));
    const double y = std::clamp(std::abs(z) / g.dz, 0.0, static_cast<double>(g.Nz - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(x), g.Nr - 2);
    const std::size_t j = std::min(static_cast<std::size_t>(y), g.Nz - 2);
    const double tx = x - static_cast<double>(i), ty = y - static_cast<double>(j);
    return (1 - tx) * (1 - ty) * f(i, j) + tx * (1 - ty) * f(i + 1, j) + (1 - tx) * ty * f(i, j + 1)
         + tx * ty * f(i + 1, j + 1);
}

void write_field_csv(std::ostream& os, const ScalarField& f)
{
    os << "r,z,value\n";
    for (std::size_t i = 0; i < f.grid.Nr; ++i)
        for (std::size_t j = 0; j < f.grid.Nz; ++j)
            os << fmt17(f.grid.r(i)) << ',' << fmt17(f.grid.z(j)) << ',' << fmt17(f(i, j)) << '\n';
}

namespace {

constexpr char kMagic[8] = {'V', 'P', 'F', 'I', 'E', 'L', 'D', '1'};

template <class T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& path)
{
    T v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated field file " + path);
    return v;
}

}  // namespace

void write_field_binary(const std::string& path, const ScalarField& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(os, f.grid.Nr);
    put<std::uint64_t>(os, f.grid.Nz);
    put<double>(os, f.grid.dr);
    put<double>(os, f.grid.dz);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(f.kind));
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!os) throw FormatError("write failed for " + path);
}

ScalarField read_field_binary(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open field file " + path);
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw FormatError(path + " is not a VPFIELD1 file");
    }
    CylGrid g;
    g.Nr = get<std::uint64_t>(is, path);
    g.Nz = get<std::uint64_t>(is, path);
    g.dr = get<double>(is, path);
    g.dz = get<double>(is, path);
    const auto kind = get<std::uint64_t>(is, path);
    if (kind > 2) throw FormatError("unknown field kind in " + path);
    if (g.Nr == 0 || g.Nz == 0 || g.Nr > (1u << 20) || g.Nz > (1u << 20)) throw FormatError("bad grid in " + path);
    ScalarField f(g, static_cast<FieldKind>(kind));
    if (!is.read(reinterpret_cast<char*>(f.values.data()),
                 static_cast<std::streamsize>(f.values.size() * sizeof(double)))) {
        throw FormatError("truncated field data in " + path);
    }
    return f;
}

}  // namespace vps
