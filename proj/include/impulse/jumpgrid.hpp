#ifndef IMPULSE_JUMPGRID_HPP
#define IMPULSE_JUMPGRID_HPP

#include <string>
#include <vector>

#include "impulse/model.hpp"

namespace impulse {

struct GridSpec {
  int n = 50;
  int L = 100;
  double rho = 0.02;
  double dt = 0.04;
  bool two_d = false; // 1-D mode keeps a single row at y = 0

  double h() const { return 1.0 / n; }
  int rows() const { return two_d ? n + 1 : 1; }  // vertex rows
  int cell_rows() const { return two_d ? n : 1; } // cell rows
  void validate() const;
};

// sec31: h^1.5, sec41: h, sec42: 10 n^-1.5
double rho_preset(const std::string& name, int n);

struct JumpGrid {
  int n = 0;
  int L = 0;
  bool two_d = false;
  double lambda_eff = 0.0;
  std::vector<double> z, nu;

  // HJB tables over vertices. a is the post-jump cell index floor(n(x_i - z_l)),
  // -1 when the jump overshoots x = 0. b is the vertex row nearest to y_j g.
  std::vector<int> a;     // [(n+1) x L]
  std::vector<int> b;     // [(n+1) x rows x L], empty in 1-D
  // FP tables over cells (0-based; -1 marks jumps into the x = 0 boundary).
  std::vector<int> alpha; // [n x L]
  std::vector<int> beta;  // [n x cell_rows x L], empty in 1-D
  std::vector<int> gamma; // [L]
  std::vector<int> omega; // [cell_rows x L], empty in 1-D

  int a_at(int i, int l) const { return a[static_cast<std::size_t>(i) * L + l]; }
  int b_at(int i, int j, int l) const {
    return two_d ? b[(static_cast<std::size_t>(j) * (n + 1) + i) * L + l] : 0;
  }
  int alpha_at(int i, int l) const { return alpha[static_cast<std::size_t>(i) * L + l]; }
  int beta_at(int i, int j, int l) const {
    return two_d ? beta[(static_cast<std::size_t>(j) * n + i) * L + l] : 0;
  }
  int omega_at(int j, int l) const {
    return two_d ? omega[static_cast<std::size_t>(j) * L + l] : 0;
  }
  // Vertex actually reached by the jump: the right vertex of cell a, or 0.
  int post_jump_vertex(int i, int l) const {
    const int c = a_at(i, l);
    return c < 0 ? 0 : (c + 1 > n ? n : c + 1);
  }
};

JumpGrid build_jump_grid(const GridSpec& spec, const ModelParams& params);

// k = floor(x_bar n), 0 for a negative threshold.
int replenish_cell_count(double x_bar, int n);

} // namespace impulse

#endif
