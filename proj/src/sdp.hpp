#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace irsma::sdp {

enum class Relation { LessEqual, Equal, GreaterEqual };
enum class SolveStatus { Optimal, Infeasible, MaxIterations };

// Linear functional over the decision variables: a list of PSD matrix
// blocks plus a vector of scalars. Matrix coefficients can be stored as
// diagonal entries, weighted rank-one outer products, or dense symmetric
// matrices; the solver exploits the first two when forming the Schur
// complement.
class LinearExpr {
 public:
  struct DiagTerm {
    int block;
    int index;
    double weight;
  };
  struct Rank1Term {
    int block;
    double weight;
    Eigen::VectorXd vec;
  };
  struct DenseTerm {
    int block;
    Eigen::MatrixXd mat;  // symmetric
  };

  void add_diag(int block, int index, double weight);
  void add_rank1(int block, double weight, const Eigen::VectorXd& vec);
  void add_dense(int block, const Eigen::MatrixXd& mat);
  void add_scalar(int index, double weight);

  const std::vector<DiagTerm>& diag_terms() const { return diag_; }
  const std::vector<Rank1Term>& rank1_terms() const { return rank1_; }
  const std::vector<DenseTerm>& dense_terms() const { return dense_; }
  const std::vector<std::pair<int, double>>& scalar_terms() const { return scalar_; }

  // <F, (blocks, scalars)>
  double eval(const std::vector<Eigen::MatrixXd>& blocks,
              const Eigen::VectorXd& scalars) const;

  double frobenius_norm() const;
  bool empty() const {
    return diag_.empty() && rank1_.empty() && dense_.empty() && scalar_.empty();
  }

 private:
  std::vector<DiagTerm> diag_;
  std::vector<Rank1Term> rank1_;
  std::vector<DenseTerm> dense_;
  std::vector<std::pair<int, double>> scalar_;
};

struct Constraint {
  LinearExpr lhs;
  Relation relation = Relation::Equal;
  double rhs = 0.0;
};

struct ConicProblem {
  std::vector<int> block_dims;
  int num_scalars = 0;
  std::vector<std::uint8_t> scalar_free;  // empty = all nonnegative
  LinearExpr objective;
  bool maximize = true;
  std::vector<Constraint> constraints;

  // One line per nonzero coefficient: "block row col value" (scalars are
  // reported as block == block_dims.size() with row == col == index).
  void dump(std::ostream& os) const;
};

struct IterateRecord {
  double primal_objective;  // user sense
  double dual_objective;
  double residual;
};

struct ConicSolution {
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::VectorXd scalars;
  double objective_value = 0.0;
  Eigen::VectorXd dual_values;
  SolveStatus status = SolveStatus::MaxIterations;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::string detail;
  std::vector<IterateRecord> trace;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 200;
};

ConicSolution solve(const ConicProblem& problem, const SolverOptions& options);
ConicSolution solve(const ConicProblem& problem, double tol);

// Largest eigenvalue and a unit eigenvector. Within a degenerate leading
// eigenspace the vector is the normalized projection of the first usable
// basis vector, and the global sign/phase makes the first nonzero
// component real nonnegative.
std::pair<double, Eigen::VectorXd> max_eigpair(const Eigen::MatrixXd& sym);
std::pair<double, Eigen::VectorXcd> max_eigpair(const Eigen::MatrixXcd& herm);

struct Rank1Extraction {
  Eigen::VectorXcd u;
  double residual;  // ||U - u u^H||_F / ||U||_F
};

Rank1Extraction rank1_extract(const Eigen::MatrixXcd& psd);

}  // namespace irsma::sdp
