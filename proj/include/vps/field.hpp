#pragma once

// Axisymmetric, z-even fields on the quarter plane r >= 0, z >= 0.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace vps {

struct CylGrid {
    std::size_t Nr = 0, Nz = 0;
    double dr = 0.0, dz = 0.0;

    /// Uniform grid with nodes r_i = i dr, z_j = j dz reaching Rmax and Zmax.
    static CylGrid make(std::size_t Nr, std::size_t Nz, double Rmax, double Zmax);

    double Rmax() const { return dr * static_cast<double>(Nr - 1); }
    double Zmax() const { return dz * static_cast<double>(Nz - 1); }
    double r(std::size_t i) const { return dr * static_cast<double>(i); }
    double z(std::size_t j) const { return dz * static_cast<double>(j); }
    std::size_t size() const { return Nr * Nz; }
    std::size_t index(std::size_t i, std::size_t j) const { return i * Nz + j; }

    /// Integral of r' dr' dz' over the part of node (i, j)'s cell with z' >= 0.
    double cell_area(std::size_t i, std::size_t j) const;
    /// Volume of the full axisymmetric cell, both z-halves: 4 pi cell_area.
    double cell_volume(std::size_t i, std::size_t j) const;

    bool operator==(const CylGrid& o) const
    {
        return Nr == o.Nr && Nz == o.Nz && dr == o.dr && dz == o.dz;
    }
};

nlohmann::json to_json(const CylGrid& g);
CylGrid grid_from_json(const nlohmann::json& j);

enum class FieldKind : std::uint64_t { Density = 0, Potential = 1, EffectivePotential = 2 };

std::string to_string(FieldKind kind);

struct ScalarField {
    CylGrid grid;
    std::vector<double> values;
    FieldKind kind = FieldKind::Density;

    ScalarField() = default;
    ScalarField(const CylGrid& g, FieldKind k, double fill = 0.0) : grid(g), values(g.size(), fill), kind(k) {}

    double& operator()(std::size_t i, std::size_t j) { return values[grid.index(i, j)]; }
    double operator()(std::size_t i, std::size_t j) const { return values[grid.index(i, j)]; }
    double sup_abs() const;
};

/// Bilinear interpolation at cylindrical (r, z); uses |z| and clamps to the grid.
double interpolate(const ScalarField& f, double r, double z);

void write_field_csv(std::ostream& os, const ScalarField& f);

/// "VPFIELD1" | u64 Nr | u64 Nz | f64 dr | f64 dz | u64 kind | f64 values (little-endian).
void write_field_binary(const std::string& path, const ScalarField& f);
ScalarField read_field_binary(const std::string& path);

}  // namespace vps
