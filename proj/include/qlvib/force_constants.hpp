#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "qlvib/crystal.hpp"

namespace qlvib {

/// 3×3 interatomic force-constant block in eV/Å².
using Block = Eigen::Matrix3d;

class ForceConstants;

/// Accumulates blocks row by row; `finish` freezes them into block-CSR storage.
class BlockAssembler {
 public:
  explicit BlockAssembler(std::size_t natoms);

  void add(int i, int j, const Block& b);
  void set(int i, int j, const Block& b);
  /// Sets block(i, j) = b and block(j, i) = bᵀ.
  void set_pair(int i, int j, const Block& b);
  bool contains(int i, int j) const;

  ForceConstants finish(std::shared_ptr<const Supercell> cell, double cutoff) &&;

 private:
  void check(int i, int j) const;
  std::vector<std::map<int, Block>> rows_;
};

/// Block-sparse Φ with both (i, j) and (j, i) stored. Immutable.
class ForceConstants {
 public:
  struct Row {
    std::span<const int> cols;
    std::span<const Block> blocks;
  };

  std::size_t natoms() const { return row_ptr_.size() - 1; }
  double cutoff() const { return cutoff_; }
  const Supercell& cell() const { return *cell_; }
  const std::shared_ptr<const Supercell>& cell_ptr() const { return cell_; }

  Row row(int i) const;
  /// nullptr when the block is absent.
  const Block* find(int i, int j) const;
  Block block(int i, int j) const;
  std::size_t stored_blocks() const { return cols_.size(); }

  /// max |block(i,j) − block(j,i)ᵀ| over all stored pairs, eV/Å².
  double symmetry_residual() const;
  /// max |Σ_j block(i,j)[a,b]| over atoms and Cartesian pairs, eV/Å².
  double asr_residual() const;

  Eigen::MatrixXd to_dense() const;

 private:
  friend class BlockAssembler;
  ForceConstants() = default;

  std::shared_ptr<const Supercell> cell_;
  double cutoff_ = 0.0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<Block> blocks_;
};

/// Replaces every self block with −Σ_{j≠i} block(i, j). Off-diagonal blocks untouched.
ForceConstants enforce_asr(const ForceConstants& fc);

/// Averages block(i, j) with block(j, i)ᵀ.
ForceConstants symmetrize(const ForceConstants& fc);

/// Largest elementwise difference between two force-constant sets on cells of equal size.
double max_block_difference(const ForceConstants& a, const ForceConstants& b);

/// Text format:
///   natoms <M>
///   cutoff_ang <r>
///   i j m00 m01 m02 m10 m11 m12 m20 m21 m22      (one record per stored block, i <= j)
/// Indices are 0-based, values in eV/Å² with 17 significant digits. Lines
/// starting with '#' are ignored on input. A (j, i) record, when present,
/// overrides the implied transpose of (i, j).
void write_force_constants(const ForceConstants& fc, std::ostream& out);
void write_force_constants(const ForceConstants& fc, const std::filesystem::path& path);
ForceConstants read_force_constants(std::istream& in, std::shared_ptr<const Supercell> cell);
ForceConstants read_force_constants(const std::filesystem::path& path,
                                    std::shared_ptr<const Supercell> cell);

}  // namespace qlvib
