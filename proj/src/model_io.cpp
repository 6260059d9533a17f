#include "phasehit/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace phasehit {

std::string lattice_label(const std::vector<int>& z) {
  std::string out;
  for (size_t i = 0; i < z.size(); ++i) {
    if (i) out.push_back('_');
    out += std::to_string(z[i]);
  }
  return out;
}

IntensityModel expand_lattice(const LatticeSpec& spec) {
  if (spec.dims.empty()) throw ValueError("lattice: no dimensions given");
  for (int d : spec.dims)
    if (d < 2) throw ValueError("lattice: each coordinate needs at least two levels");
  if (spec.increments.empty()) throw ValueError("lattice: no increments given");
  const size_t m = spec.dims.size();
  for (const auto& [step, rate] : spec.increments) {
    if (step.size() != m) throw ValueError("lattice: increment dimension mismatch");
    if (!(rate > 0.0)) throw ValueError("lattice: increment rates must be positive");
  }

  // Enumerate the box row-major, last coordinate fastest.
  std::vector<std::vector<int>> points;
  std::vector<int> z(m, 0);
  while (true) {
    points.push_back(z);
    size_t d = m;
    while (d-- > 0) {
      if (++z[d] < spec.dims[d]) break;
      z[d] = 0;
      if (d == 0) goto done;
    }
  }
done:
  std::vector<std::string> labels;
  labels.reserve(points.size());
  for (const auto& p : points) labels.push_back(lattice_label(p));

  IntensityModel model;
  model.space = StateSpace(labels);
  const Index n = model.space.size();
  model.lambda = Matrix::Zero(n, n);

  auto flat = [&](const std::vector<int>& p) {
    Index idx = 0;
    for (size_t d = 0; d < m; ++d) idx = idx * spec.dims[d] + p[d];
    return idx;
  };

  for (Index i = 0; i < n; ++i) {
    const auto& from = points[static_cast<size_t>(i)];
    for (const auto& [step, rate] : spec.increments) {
      bool allowed = true;
      std::vector<int> to(m);
      for (size_t d = 0; d < m && allowed; ++d) {
        if (from[d] == 0 && step[d] != 0) allowed = false;  // absorbed coordinate
        if (from[d] == spec.dims[d] - 1 && step[d] > 0) allowed = false;  // reflecting face
        to[d] = from[d] + step[d];
        if (to[d] < 0 || to[d] >= spec.dims[d]) allowed = false;
      }
      if (allowed) model.lambda(i, flat(to)) += rate;
    }
    model.lambda(i, i) = -model.lambda.row(i).sum();
  }

  for (size_t k = 0; k < m; ++k) {
    StateSet face(n);
    for (Index i = 0; i < n; ++i)
      if (points[static_cast<size_t>(i)][k] == 0) face.insert(i);
    model.targets.emplace(static_cast<int>(k) + 1, face);
  }
  model.alpha = RowVector::Zero(n);
  return model;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '#') break;
    out.push_back(tok);
  }
  return out;
}

const char* skip_plus(const std::string& tok) {
  // from_chars takes '-' but not a leading '+'
  return tok.size() > 1 && tok[0] == '+' ? tok.data() + 1 : tok.data();
}

double parse_number(const std::string& tok, int line) {
  double v = 0.0;
  const char* begin = skip_plus(tok);
  auto [p, ec] = std::from_chars(begin, tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError("expected a number, got '" + tok + "'", line);
  return v;
}

int parse_int(const std::string& tok, int line) {
  int v = 0;
  const char* begin = skip_plus(tok);
  auto [p, ec] = std::from_chars(begin, tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError("expected an integer, got '" + tok + "'", line);
  return v;
}

void set_uniform_interior(IntensityModel& model) {
  const StateSet interior = model.target_union().complement();
  const Index count = interior.count();
  if (count == 0)
    throw ValueError("alpha uniform-interior: every state belongs to some target");
  model.alpha = RowVector::Zero(model.num_states());
  for (Index i : interior.indices()) model.alpha(i) = 1.0 / static_cast<double>(count);
}

}  // namespace

IntensityModel parse_model(std::istream& in) {
  std::vector<std::string> states;
  std::vector<std::tuple<std::string, std::string, double, int>> rates;
  std::vector<std::tuple<int, std::string, int>> target_labels;
  std::vector<std::tuple<std::string, double, int>> alpha_entries;
  bool alpha_uniform_interior = false;
  LatticeSpec lattice;
  bool has_lattice = false, has_explicit = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = tokenize(line);
    if (tok.empty()) continue;
    const std::string& head = tok[0];
    if (head == "states") {
      if (tok.size() < 2) throw ParseError("states: needs at least one label", lineno);
      states.insert(states.end(), tok.begin() + 1, tok.end());
      has_explicit = true;
    } else if (head == "rate") {
      if (tok.size() != 4) throw ParseError("rate: expected 'rate from to value'", lineno);
      rates.emplace_back(tok[1], tok[2], parse_number(tok[3], lineno), lineno);
      has_explicit = true;
    } else if (head == "target") {
      if (tok.size() < 3) throw ParseError("target: expected 'target k state...'", lineno);
      const int k = parse_int(tok[1], lineno);
      for (size_t i = 2; i < tok.size(); ++i) target_labels.emplace_back(k, tok[i], lineno);
      has_explicit = true;
    } else if (head == "alpha") {
      if (tok.size() == 2 && tok[1] == "uniform-interior") {
        alpha_uniform_interior = true;
      } else if (tok.size() == 3) {
        alpha_entries.emplace_back(tok[1], parse_number(tok[2], lineno), lineno);
      } else {
        throw ParseError("alpha: expected 'alpha state weight' or 'alpha uniform-interior'",
                         lineno);
      }
    } else if (head == "lattice") {
      has_lattice = true;
      if (tok.size() >= 2 && tok[1] == "dims") {
        if (!lattice.dims.empty()) throw ParseError("lattice dims: given twice", lineno);
        for (size_t i = 2; i < tok.size(); ++i)
          lattice.dims.push_back(parse_int(tok[i], lineno));
        if (lattice.dims.empty()) throw ParseError("lattice dims: needs levels", lineno);
      } else if (tok.size() >= 2 && tok[1] == "inc") {
        if (tok.size() < 4)
          throw ParseError("lattice inc: expected 'lattice inc dz... rate'", lineno);
        std::vector<int> step;
        for (size_t i = 2; i + 1 < tok.size(); ++i) step.push_back(parse_int(tok[i], lineno));
        lattice.increments.emplace_back(std::move(step),
                                        parse_number(tok.back(), lineno));
      } else {
        throw ParseError("lattice: expected 'lattice dims ...' or 'lattice inc ...'", lineno);
      }
    } else {
      throw ParseError("unknown directive '" + head + "'", lineno);
    }
  }

  if (has_lattice && has_explicit)
    throw ParseError("a model is either a lattice or explicit, not both", lineno);

  IntensityModel model;
  if (has_lattice) {
    try {
      model = expand_lattice(lattice);
    } catch (const ValueError& e) {
      throw ParseError(e.what(), lineno);
    }
  } else {
    if (states.empty()) throw ParseError("no states declared", lineno);
    try {
      model.space = StateSpace(states);
    } catch (const ValueError& e) {
      throw ParseError(e.what(), lineno);
    }
    const Index n = model.space.size();
    model.lambda = Matrix::Zero(n, n);
    for (const auto& [from, to, value, at] : rates) {
      const auto fi = model.space.find(from);
      const auto ti = model.space.find(to);
      if (!fi) throw ParseError("rate: unknown state '" + from + "'", at);
      if (!ti) throw ParseError("rate: unknown state '" + to + "'", at);
      if (*fi == *ti) throw ParseError("rate: self transitions are not rates", at);
      model.lambda(*fi, *ti) += value;
    }
    for (Index i = 0; i < n; ++i) model.lambda(i, i) = -model.lambda.row(i).sum();
    for (const auto& [k, lbl, at] : target_labels) {
      const auto idx = model.space.find(lbl);
      if (!idx)
        throw ParseError("target " + std::to_string(k) + ": unknown state '" + lbl + "'", at);
      auto [it, inserted] = model.targets.emplace(k, StateSet(n));
      it->second.insert(*idx);
    }
    model.alpha = RowVector::Zero(n);
  }

  if (alpha_uniform_interior) {
    if (!alpha_entries.empty())
      throw ParseError("alpha: explicit weights conflict with uniform-interior", lineno);
    set_uniform_interior(model);
  } else {
    for (const auto& [lbl, w, at] : alpha_entries) {
      const auto idx = model.space.find(lbl);
      if (!idx) throw ParseError("alpha: unknown state '" + lbl + "'", at);
      model.alpha(*idx) += w;
    }
  }

  ValidationReport rep = validate(model);
  if (!rep.ok()) throw ValueError("model file invalid:\n" + rep.summary());
  return model;
}

IntensityModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open model file '" + path + "'");
  return parse_model(in);
}

namespace {

std::string exact(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

std::string serialize_model(const IntensityModel& model) {
  std::ostringstream os;
  os << "# phasehit model\n";
  os << "states";
  for (const auto& lbl : model.space.labels()) os << ' ' << lbl;
  os << '\n';
  const Index n = model.num_states();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && model.lambda(i, j) != 0.0)
        os << "rate " << model.space.label(i) << ' ' << model.space.label(j) << ' '
           << exact(model.lambda(i, j)) << '\n';
  for (const auto& [k, g] : model.targets) {
    os << "target " << k;
    for (Index i : g.indices()) os << ' ' << model.space.label(i);
    os << '\n';
  }
  for (Index i = 0; i < n; ++i)
    if (model.alpha(i) != 0.0)
      os << "alpha " << model.space.label(i) << ' ' << exact(model.alpha(i)) << '\n';
  return os.str();
}

}  // namespace phasehit
