#include "qlvib/force_constants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qlvib/error.hpp"

namespace qlvib {

BlockAssembler::BlockAssembler(std::size_t natoms) : rows_(natoms) {}

void BlockAssembler::check(int i, int j) const {
  const int n = static_cast<int>(rows_.size());
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw ValidationError("block index (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") out of range for " + std::to_string(n) + " atoms");
}

void BlockAssembler::add(int i, int j, const Block& b) {
  check(i, j);
  auto [it, inserted] = rows_[i].try_emplace(j, b);
  if (!inserted) it->second += b;
}

void BlockAssembler::set(int i, int j, const Block& b) {
  check(i, j);
  rows_[i][j] = b;
}

void BlockAssembler::set_pair(int i, int j, const Block& b) {
  set(i, j, b);
  if (i != j) set(j, i, b.transpose());
}

bool BlockAssembler::contains(int i, int j) const {
  check(i, j);
  return rows_[i].count(j) != 0;
}

ForceConstants BlockAssembler::finish(std::shared_ptr<const Supercell> cell, double cutoff) && {
  if (!cell) throw ValidationError("force constants need a cell");
  if (cell->size() != rows_.size())
    throw ValidationError("force constants cover " + std::to_string(rows_.size()) +
                          " atoms but the cell has " + std::to_string(cell->size()));
  ForceConstants fc;
  fc.cell_ = std::move(cell);
  fc.cutoff_ = cutoff;
  fc.row_ptr_.assign(1, 0);
  fc.row_ptr_.reserve(rows_.size() + 1);
  std::size_t total = 0;
  for (const auto& r : rows_) total += r.size();
  fc.cols_.reserve(total);
  fc.blocks_.reserve(total);
  for (auto& r : rows_) {
    for (const auto& [j, b] : r) {
      if (!b.allFinite()) throw ValidationError("non-finite force constant entry");
      fc.cols_.push_back(j);
      fc.blocks_.push_back(b);
    }
    fc.row_ptr_.push_back(fc.cols_.size());
    r.clear();
  }
  return fc;
}

ForceConstants::Row ForceConstants::row(int i) const {
  if (i < 0 || i >= static_cast<int>(natoms())) throw ValidationError("row index out of range");
  const auto b = row_ptr_[i];
  const auto e = row_ptr_[i + 1];
  return {std::span<const int>(cols_.data() + b, e - b),
          std::span<const Block>(blocks_.data() + b, e - b)};
}

const Block* ForceConstants::find(int i, int j) const {
  const auto r = row(i);
  const auto it = std::lower_bound(r.cols.begin(), r.cols.end(), j);
  if (it == r.cols.end() || *it != j) return nullptr;
  return &r.blocks[static_cast<std::size_t>(it - r.cols.begin())];
}

Block ForceConstants::block(int i, int j) const {
  const Block* b = find(i, j);
  return b ? *b : Block::Zero();
}

double ForceConstants::symmetry_residual() const {
  double res = 0.0;
  for (int i = 0; i < static_cast<int>(natoms()); ++i) {
    const auto r = row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      const Block partner = block(r.cols[k], i);
      res = std::max(res, (r.blocks[k] - partner.transpose()).cwiseAbs().maxCoeff());
    }
  }
  return res;
}

double ForceConstants::asr_residual() const {
  double res = 0.0;
  for (int i = 0; i < static_cast<int>(natoms()); ++i) {
    Block sum = Block::Zero();
    for (const auto& b : row(i).blocks) sum += b;
    res = std::max(res, sum.cwiseAbs().maxCoeff());
  }
  return res;
}

Eigen::MatrixXd ForceConstants::to_dense() const {
  const auto n = static_cast<Eigen::Index>(natoms());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    const auto r = row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k)
      out.block<3, 3>(3 * i, 3 * r.cols[k]) = r.blocks[k];
  }
  return out;
}

ForceConstants enforce_asr(const ForceConstants& fc) {
  const int n = static_cast<int>(fc.natoms());
  BlockAssembler asm_(fc.natoms());
  for (int i = 0; i < n; ++i) {
    const auto r = fc.row(i);
    // Summed in a canonical order so the self block does not depend on atom numbering.
    std::vector<const Block*> off;
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (r.cols[k] == i) continue;
      asm_.set(i, r.cols[k], r.blocks[k]);
      off.push_back(&r.blocks[k]);
    }
    std::sort(off.begin(), off.end(), [](const Block* a, const Block* b) {
      return std::lexicographical_compare(a->data(), a->data() + 9, b->data(), b->data() + 9);
    });
    Block self = Block::Zero();
    for (const Block* b : off) self -= *b;
    asm_.set(i, i, self);
  }
  return std::move(asm_).finish(fc.cell_ptr(), fc.cutoff());
}

ForceConstants symmetrize(const ForceConstants& fc) {
  const int n = static_cast<int>(fc.natoms());
  BlockAssembler asm_(fc.natoms());
  for (int i = 0; i < n; ++i) {
    const auto r = fc.row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      const int j = r.cols[k];
      asm_.set(i, j, 0.5 * (r.blocks[k] + fc.block(j, i).transpose()));
      if (!fc.find(j, i)) asm_.set(j, i, 0.5 * r.blocks[k].transpose());
    }
  }
  return std::move(asm_).finish(fc.cell_ptr(), fc.cutoff());
}

double max_block_difference(const ForceConstants& a, const ForceConstants& b) {
  if (a.natoms() != b.natoms()) throw ValidationError("force-constant sets differ in size");
  double res = 0.0;
  for (int i = 0; i < static_cast<int>(a.natoms()); ++i) {
    for (const auto* fc : {&a, &b}) {
      const auto* other = fc == &a ? &b : &a;
      const auto r = fc->row(i);
      for (std::size_t k = 0; k < r.cols.size(); ++k)
        res = std::max(res, (r.blocks[k] - other->block(i, r.cols[k])).cwiseAbs().maxCoeff());
    }
  }
  return res;
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_force_constants(const ForceConstants& fc, std::ostream& out) {
  out << "natoms " << fc.natoms() << '\n';
  out << "cutoff_ang ";
  put_double(out, fc.cutoff());
  out << '\n';
  for (int i = 0; i < static_cast<int>(fc.natoms()); ++i) {
    const auto r = fc.row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      const int j = r.cols[k];
      const Block& b = r.blocks[k];
      // Lower-triangle records are only needed when they are not the transpose.
      if (j < i) {
        const Block* up = fc.find(j, i);
        if (up && (*up - b.transpose()).cwiseAbs().maxCoeff() == 0.0) continue;
      }
      out << i << ' ' << j;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
          out << ' ';
          put_double(out, b(p, q));
        }
      out << '\n';
    }
  }
}

void write_force_constants(const ForceConstants& fc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_force_constants(fc, out);
  if (!out) throw IoError("write failed: " + path.string());
}

ForceConstants read_force_constants(std::istream& in, std::shared_ptr<const Supercell> cell) {
  if (!cell) throw ValidationError("force constants need a cell");
  std::string line;
  long long natoms = -1;
  double cutoff = -1.0;
  int lineno = 0;
  auto next_content = [&](std::string& dst) {
    while (std::getline(in, dst)) {
      ++lineno;
      const auto pos = dst.find_first_not_of(" \t\r");
      if (pos == std::string::npos || dst[pos] == '#') continue;
      return true;
    }
    return false;
  };
  auto header = [&](const char* key, auto& value) {
    if (!next_content(line)) throw ValidationError(std::string("force-constant file: missing ") + key);
    std::istringstream ss(line);
    std::string k;
    if (!(ss >> k >> value) || k != key)
      throw ValidationError("force-constant file line " + std::to_string(lineno) + ": expected '" +
                            key + " <value>'");
  };
  header("natoms", natoms);
  header("cutoff_ang", cutoff);
  if (natoms != static_cast<long long>(cell->size()))
    throw ValidationError("force-constant file has natoms " + std::to_string(natoms) +
                          " but the cell has " + std::to_string(cell->size()));
  if (!std::isfinite(cutoff) || cutoff < 0.0)
    throw ValidationError("force-constant file: invalid cutoff_ang");

  struct Record {
    int i, j;
    Block b;
  };
  std::vector<Record> records;
  std::set<std::pair<int, int>> seen;
  while (next_content(line)) {
    std::istringstream ss(line);
    long long i = 0, j = 0;
    Record rec{};
    if (!(ss >> i >> j)) throw ValidationError("force-constant file line " + std::to_string(lineno) + ": bad indices");
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        std::string tok;
        if (!(ss >> tok))
          throw ValidationError("force-constant file line " + std::to_string(lineno) + ": expected 9 values");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
          throw ValidationError("force-constant file line " + std::to_string(lineno) + ": bad number '" + tok + "'");
        if (!std::isfinite(v))
          throw ValidationError("force-constant file line " + std::to_string(lineno) + ": non-finite entry");
        rec.b(p, q) = v;
      }
    std::string extra;
    if (ss >> extra) throw ValidationError("force-constant file line " + std::to_string(lineno) + ": trailing data");
    if (i < 0 || j < 0 || i >= natoms || j >= natoms)
      throw ValidationError("force-constant file line " + std::to_string(lineno) + ": atom index out of range");
    rec.i = static_cast<int>(i);
    rec.j = static_cast<int>(j);
    if (!seen.emplace(rec.i, rec.j).second)
      throw ValidationError("force-constant file line " + std::to_string(lineno) + ": duplicate block");
    records.push_back(rec);
  }

  BlockAssembler asm_(cell->size());
  for (const auto& r : records)
    if (r.i <= r.j) asm_.set_pair(r.i, r.j, r.b);
  // Explicit lower-triangle records replace the implied transposes.
  for (const auto& r : records)
    if (r.i > r.j) {
      asm_.set(r.i, r.j, r.b);
      if (!seen.count({r.j, r.i})) asm_.set(r.j, r.i, r.b.transpose());
    }
  return std::move(asm_).finish(std::move(cell), cutoff);
}

ForceConstants read_force_constants(const std::filesystem::path& path,
                                    std::shared_ptr<const Supercell> cell) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_force_constants(in, std::move(cell));
}

}  // namespace qlvib
