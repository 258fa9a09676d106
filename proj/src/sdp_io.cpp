#include "cgrelax/sdp.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace cgrelax::sdp {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) fail("unexpected end of input");
    return w;
  }
  void expect(const std::string& kw) {
    const std::string w = word();
    if (w != kw) fail("expected '" + kw + "', found '" + w + "'");
  }
  long integer() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      long v = std::stol(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception&) {
      fail("expected an integer, found '" + w + "'");
    }
  }
  double real() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      double v = std::stod(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception&) {
      fail("expected a number, found '" + w + "'");
    }
  }
  [[noreturn]] void fail(const std::string& msg) { throw ValidationError("sdp text: " + msg); }

 private:
  std::istream& is_;
};

}  // namespace

void write_text(std::ostream& os, const ConicProgram& p) {
  os << "cgrelax-sdp 1\n";
  os << "nvars " << p.num_vars << "\n";
  os << "nblocks " << p.blocks.size() << "\n";
  os << "blocksizes";
  for (const auto& b : p.blocks) os << ' ' << b.size;
  os << "\n";

  int nnz_c = 0;
  for (int k = 0; k < p.c.size(); ++k) nnz_c += p.c(k) != 0.0;
  os << "objective " << nnz_c << "\n";
  for (int k = 0; k < p.c.size(); ++k)
    if (p.c(k) != 0.0) os << k << ' ' << num(p.c(k)) << "\n";

  std::size_t nnz = 0;
  for (const auto& b : p.blocks) {
    nnz += b.constant.size();
    for (const auto& [k, es] : b.coefficients) nnz += es.size();
  }
  os << "entries " << nnz << "\n";
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const auto& b = p.blocks[bi];
    for (const auto& e : b.constant) os << bi << " -1 " << e.row << ' ' << e.col << ' ' << num(e.value) << "\n";
    for (const auto& [k, es] : b.coefficients)
      for (const auto& e : es) os << bi << ' ' << k << ' ' << e.row << ' ' << e.col << ' ' << num(e.value) << "\n";
  }

  os << "equalities " << p.E.rows() << ' ' << p.E.nonZeros() << "\n";
  for (int r = 0; r < p.E.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(p.E, r); it; ++it)
      os << r << ' ' << it.col() << ' ' << num(it.value()) << "\n";
  os << "rhs\n";
  for (int r = 0; r < p.f.size(); ++r) os << num(p.f(r)) << "\n";
  os << "end\n";
}

ConicProgram read_text(std::istream& is) {
  Reader rd(is);
  rd.expect("cgrelax-sdp");
  if (rd.integer() != 1) rd.fail("unsupported format version");

  ConicProgram p;
  rd.expect("nvars");
  p.num_vars = static_cast<int>(rd.integer());
  if (p.num_vars <= 0) rd.fail("nvars must be positive");
  rd.expect("nblocks");
  const long nb = rd.integer();
  if (nb < 0) rd.fail("negative block count");
  rd.expect("blocksizes");
  for (long b = 0; b < nb; ++b) {
    const long side = rd.integer();
    if (side <= 0) rd.fail("block side must be positive");
    p.blocks.emplace_back(static_cast<int>(side));
  }

  rd.expect("objective");
  p.c = Eigen::VectorXd::Zero(p.num_vars);
  const long nc = rd.integer();
  for (long i = 0; i < nc; ++i) {
    const long k = rd.integer();
    if (k < 0 || k >= p.num_vars) rd.fail("objective index out of range");
    p.c(k) += rd.real();
  }

  rd.expect("entries");
  const long ne = rd.integer();
  for (long i = 0; i < ne; ++i) {
    const long b = rd.integer();
    const long var = rd.integer();
    const long r = rd.integer();
    const long c = rd.integer();
    const double v = rd.real();
    if (b < 0 || b >= nb) rd.fail("block index out of range");
    if (var < -1 || var >= p.num_vars) rd.fail("variable index out of range");
    auto& blk = p.blocks[b];
    if (r < 0 || c < r || c >= blk.size) rd.fail("entry must lie in the upper triangle of its block");
    if (var < 0) {
      blk.constant.push_back({static_cast<int>(r), static_cast<int>(c), v});
    } else {
      blk.coefficients[static_cast<int>(var)].push_back({static_cast<int>(r), static_cast<int>(c), v});
    }
  }

  rd.expect("equalities");
  const long rows = rd.integer();
  const long enz = rd.integer();
  if (rows < 0 || enz < 0) rd.fail("negative equality counts");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(enz);
  for (long i = 0; i < enz; ++i) {
    const long r = rd.integer();
    const long k = rd.integer();
    const double v = rd.real();
    if (r < 0 || r >= rows || k < 0 || k >= p.num_vars) rd.fail("equality index out of range");
    trips.emplace_back(static_cast<int>(r), static_cast<int>(k), v);
  }
  p.E.resize(rows, p.num_vars);
  p.E.setFromTriplets(trips.begin(), trips.end());
  rd.expect("rhs");
  p.f.resize(rows);
  for (long r = 0; r < rows; ++r) p.f(r) = rd.real();
  rd.expect("end");
  p.validate();
  return p;
}

}  // namespace cgrelax::sdp
