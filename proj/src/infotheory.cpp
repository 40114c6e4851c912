#include "dmib/infotheory.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dmib {

namespace {

// 0 log 0 = 0 convention for every expectation below.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double pair_mi(const std::vector<double>& joint, std::size_t nx, std::size_t ny) {
  std::vector<double> px(nx, 0.0), py(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      px[x] += joint[x * ny + y];
      py[y] += joint[x * ny + y];
    }
  double mi = 0.0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const double pxy = joint[x * ny + y];
      if (pxy > 0.0) mi += pxy * std::log(pxy / (px[x] * py[y]));
    }
  return mi;
}

}  // namespace

void DiscreteJoint::validate() const {
  if (nf == 0 || nfs == 0 || ny == 0 || p.size() != nf * nfs * ny)
    throw DataError("joint: table size does not match alphabet sizes");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DataError("joint: negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DataError("joint: total mass " + std::to_string(total) + " is not 1");
}

std::vector<double> DiscreteJoint::marginal_f() const {
  std::vector<double> m(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[f] += at(f, fs, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_fs() const {
  std::vector<double> m(nfs, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[fs] += at(f, fs, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_y() const {
  std::vector<double> m(ny, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[y] += at(f, fs, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_f_fs() const {
  std::vector<double> m(nf * nfs, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[f * nfs + fs] += at(f, fs, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_f_y() const {
  std::vector<double> m(nf * ny, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[f * ny + y] += at(f, fs, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_fs_y() const {
  std::vector<double> m(nfs * ny, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t fs = 0; fs < nfs; ++fs)
      for (std::size_t y = 0; y < ny; ++y) m[fs * ny + y] += at(f, fs, y);
  return m;
}

DiscreteJoint DiscreteJoint::random(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng) {
  DiscreteJoint j{nf, nfs, ny, std::vector<double>(nf * nfs * ny)};
  double total = 0.0;
  for (double& v : j.p) {
    v = rng.next_double();
    total += v;
  }
  for (double& v : j.p) v /= total;
  return j;
}

void DiscreteJoint::save_text(std::ostream& os) const {
  os << "F " << nf << " F* " << nfs << " Y " << ny << "\n";
  os.precision(17);
  for (double v : p) os << v << "\n";
}

DiscreteJoint DiscreteJoint::load_text(std::istream& is) {
  std::string tf, tfs, ty;
  DiscreteJoint j;
  if (!(is >> tf >> j.nf >> tfs >> j.nfs >> ty >> j.ny) || tf != "F" || tfs != "F*" || ty != "Y")
    throw DataError("joint: malformed header, expected 'F <n> F* <n> Y <n>'");
  j.p.resize(j.nf * j.nfs * j.ny);
  for (double& v : j.p)
    if (!(is >> v)) throw DataError("joint: truncated probability table");
  j.validate();
  return j;
}

void DeterministicEncoder::validate(std::size_t nfs) const {
  if (map.empty()) throw DataError("encoder: empty map");
  for (std::size_t target : map)
    if (target >= nfs)
      throw DataError("encoder: image " + std::to_string(target) + " outside alphabet of size " +
                      std::to_string(nfs));
}

DeterministicEncoder DeterministicEncoder::random(std::size_t nf, std::size_t nfs, RngState& rng) {
  DeterministicEncoder e;
  e.map.resize(nf);
  for (auto& m : e.map) m = static_cast<std::size_t>(rng.next_int(0, static_cast<std::int64_t>(nfs) - 1));
  return e;
}

DeterministicEncoder DeterministicEncoder::identity(std::size_t nf) {
  DeterministicEncoder e;
  e.map.resize(nf);
  for (std::size_t i = 0; i < nf; ++i) e.map[i] = i;
  return e;
}

DeterministicEncoder DeterministicEncoder::constant(std::size_t nf, std::size_t target) {
  DeterministicEncoder e;
  e.map.assign(nf, target);
  return e;
}

double entropy(const std::vector<double>& dist) {
  double total = 0.0;
  for (double v : dist) {
    if (!(v >= 0.0)) throw DataError("entropy: negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DataError("entropy: mass " + std::to_string(total) + " is not 1");
  double h = 0.0;
  for (double v : dist) h -= xlogx(v);
  return h;
}

double mutual_information(const DiscreteJoint& joint, VarPair vars) {
  joint.validate();
  switch (vars) {
    case VarPair::FusedDistilled:
      return pair_mi(joint.marginal_f_fs(), joint.nf, joint.nfs);
    case VarPair::FusedLabel:
      return pair_mi(joint.marginal_f_y(), joint.nf, joint.ny);
    case VarPair::DistilledLabel:
      return pair_mi(joint.marginal_fs_y(), joint.nfs, joint.ny);
  }
  throw UsageError("mutual_information: bad pair selector");
}

double conditional_mi(const DiscreteJoint& joint) {
  joint.validate();
  const auto pfy = joint.marginal_f_y();
  const auto pfsy = joint.marginal_fs_y();
  const auto py = joint.marginal_y();
  double cmi = 0.0;
  for (std::size_t f = 0; f < joint.nf; ++f)
    for (std::size_t fs = 0; fs < joint.nfs; ++fs)
      for (std::size_t y = 0; y < joint.ny; ++y) {
        const double pffsy = joint.at(f, fs, y);
        if (pffsy <= 0.0) continue;
        cmi += pffsy * std::log(pffsy * py[y] / (pfy[f * joint.ny + y] * pfsy[fs * joint.ny + y]));
      }
  return cmi;
}

DiscreteJoint joint_from_encoder(const std::vector<double>& p_f, const DeterministicEncoder& enc,
                                 const std::vector<std::vector<double>>& p_y_given_f) {
  const std::size_t nf = p_f.size();
  if (enc.map.size() != nf)
    throw DataError("encoder: domain size " + std::to_string(enc.map.size()) +
                    " does not match |F| = " + std::to_string(nf));
  if (p_y_given_f.size() != nf) throw DataError("p(y|f): row count does not match |F|");
  const std::size_t ny = p_y_given_f.empty() ? 0 : p_y_given_f[0].size();
  std::size_t nfs = 0;
  for (auto t : enc.map) nfs = std::max(nfs, t + 1);
  enc.validate(nfs);
  DiscreteJoint j{nf, nfs, ny, std::vector<double>(nf * nfs * ny, 0.0)};
  for (std::size_t f = 0; f < nf; ++f) {
    if (p_y_given_f[f].size() != ny) throw DataError("p(y|f): ragged rows");
    for (std::size_t y = 0; y < ny; ++y) j.at(f, enc.map[f], y) = p_f[f] * p_y_given_f[f][y];
  }
  j.validate();
  return j;
}

double verify_chain_rule(const std::vector<double>& p_f, const DeterministicEncoder& enc,
                         const std::vector<std::vector<double>>& p_y_given_f) {
  const DiscreteJoint j = joint_from_encoder(p_f, enc, p_y_given_f);
  const double i_f_fs = mutual_information(j, VarPair::FusedDistilled);
  const double i_f_fs_given_y = conditional_mi(j);
  const double i_fs_y = mutual_information(j, VarPair::DistilledLabel);
  return std::abs(i_f_fs - i_f_fs_given_y - i_fs_y);
}

SufficiencyCheck verify_sufficiency_proposition(const DiscreteJoint& joint) {
  joint.validate();
  const auto pf = joint.marginal_f();
  const auto pfs = joint.marginal_fs();
  const auto pfy = joint.marginal_f_y();
  const auto pfsy = joint.marginal_fs_y();
  const auto pffs = joint.marginal_f_fs();

  double kl_term = 0.0;
  for (std::size_t f = 0; f < joint.nf; ++f)
    for (std::size_t fs = 0; fs < joint.nfs; ++fs) {
      const double w = pffs[f * joint.nfs + fs];
      if (w <= 0.0) continue;
      double kl = 0.0;
      for (std::size_t y = 0; y < joint.ny; ++y) {
        const double py_f = pfy[f * joint.ny + y] / pf[f];
        if (py_f <= 0.0) continue;
        const double py_fs = pfsy[fs * joint.ny + y] / pfs[fs];
        if (py_fs <= 0.0) {
          kl = std::numeric_limits<double>::infinity();
          break;
        }
        kl += py_f * std::log(py_f / py_fs);
      }
      kl_term += w * kl;
    }

  const double mi_gap = mutual_information(joint, VarPair::FusedLabel) -
                        mutual_information(joint, VarPair::DistilledLabel);
  return SufficiencyCheck{kl_term, mi_gap};
}

double ib_objective(const DiscreteJoint& joint, double gamma) {
  if (!(gamma >= 0.0))
    throw ParameterError("ib_objective: gamma must be >= 0, got " + std::to_string(gamma));
  return conditional_mi(joint) - gamma * mutual_information(joint, VarPair::DistilledLabel);
}

std::vector<double> random_distribution(std::size_t n, RngState& rng) {
  std::vector<double> d(n);
  double total = 0.0;
  for (double& v : d) {
    v = rng.next_double() + 1e-9;
    total += v;
  }
  for (double& v : d) v /= total;
  return d;
}

std::vector<std::vector<double>> random_conditional(std::size_t nf, std::size_t ny, RngState& rng) {
  std::vector<std::vector<double>> rows(nf);
  for (auto& row : rows) row = random_distribution(ny, rng);
  return rows;
}

DiscreteJoint random_encoder_joint(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng,
                                   DeterministicEncoder* enc_out) {
  const auto pf = random_distribution(nf, rng);
  const auto enc = DeterministicEncoder::random(nf, nfs, rng);
  const auto cond = random_conditional(nf, ny, rng);
  if (enc_out) *enc_out = enc;
  return joint_from_encoder(pf, enc, cond);
}

DiscreteJoint equal_posterior_joint(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng) {
  const auto pf = random_distribution(nf, rng);
  const auto enc = DeterministicEncoder::random(nf, nfs, rng);
  // One label posterior per encoder output; every f mapping there shares it.
  const auto posteriors = random_conditional(nfs, ny, rng);
  std::vector<std::vector<double>> cond(nf);
  for (std::size_t f = 0; f < nf; ++f) cond[f] = posteriors[enc.map[f]];
  return joint_from_encoder(pf, enc, cond);
}

}  // namespace dmib
