#include "safedro/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace safedro {

ConfigError::ConfigError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

using json = nlohmann::json;
using LineMap = std::map<std::string, int>;

int line_at(const std::string& text, std::size_t pos) {
  const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(pos, text.size()));
  return 1 + static_cast<int>(std::count(text.begin(), end, '\n'));
}

// Character iterator that tracks the line of the last non-blank character read.
struct ReadState {
  int line = 1;
  int token_line = 1;
};

class CountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator(const std::string* text, std::size_t pos, ReadState* state) : text_(text), pos_(pos), state_(state) {}
  reference operator*() const { return (*text_)[pos_]; }
  CountingIterator& operator++() {
    const char c = (*text_)[pos_];
    if (!std::isspace(static_cast<unsigned char>(c))) state_->token_line = state_->line;
    if (c == '\n') ++state_->line;
    ++pos_;
    return *this;
  }
  CountingIterator operator++(int) {
    CountingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return pos_ == o.pos_; }
  bool operator!=(const CountingIterator& o) const { return pos_ != o.pos_; }

 private:
  const std::string* text_;
  std::size_t pos_;
  ReadState* state_;
};

std::string escape(const std::string& key) {
  std::string out;
  for (const char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

// Records the line of every value under its JSON pointer.
class LineRecorder : public nlohmann::json_sax<json> {
 public:
  LineRecorder(const ReadState* state, LineMap* lines) : state_(state), lines_(lines) {}

  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override { return open(false); }
  bool start_array(std::size_t) override { return open(true); }
  bool end_object() override { return close(); }
  bool end_array() override { return close(); }
  bool key(string_t& k) override {
    frames_.back().key = k;
    (*lines_)[child_path()] = state_->token_line;
    return true;
  }
  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    error_position = position;
    error_message = ex.what();
    return false;
  }

  std::size_t error_position = 0;
  std::string error_message;

 private:
  struct Frame {
    bool array = false;
    std::size_t index = 0;
    std::string key;
    std::string path;
  };

  std::string child_path() const {
    if (frames_.empty()) return "";
    const Frame& f = frames_.back();
    return f.path + "/" + (f.array ? std::to_string(f.index) : escape(f.key));
  }
  void advance() {
    if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
  }
  bool value() {
    (*lines_)[child_path()] = state_->token_line;
    advance();
    return true;
  }
  bool open(bool array) {
    const std::string path = child_path();
    (*lines_)[path] = state_->token_line;
    frames_.push_back({array, 0, "", path});
    return true;
  }
  bool close() {
    frames_.pop_back();
    advance();
    return true;
  }

  const ReadState* state_;
  LineMap* lines_;
  std::vector<Frame> frames_;
};

// A JSON value with its pointer, for located diagnostics.
class Node {
 public:
  Node(const json* value, std::string path, const LineMap* lines) : value_(value), path_(std::move(path)), lines_(lines) {}

  int line() const {
    std::string p = path_;
    while (true) {
      const auto it = lines_->find(p);
      if (it != lines_->end()) return it->second;
      if (p.empty()) return 0;
      p.erase(p.rfind('/'));
    }
  }
  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(line(), (path_.empty() ? std::string("document") : path_) + ": " + message);
  }

  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }
  Node at(const std::string& key) const {
    if (!value_->is_object()) fail("expected an object");
    if (!value_->contains(key)) fail("missing required key '" + key + "'");
    return {&(*value_)[key], path_ + "/" + escape(key), lines_};
  }
  std::optional<Node> get(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }
  Node operator[](std::size_t i) const { return {&(*value_)[i], path_ + "/" + std::to_string(i), lines_}; }
  std::size_t size() const { return value_->size(); }
  bool is_string() const { return value_->is_string(); }
  bool is_array() const { return value_->is_array(); }

  void allow_keys(std::initializer_list<const char*> keys) const {
    if (!value_->is_object()) fail("expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : value_->items()) {
      if (!allowed.count(k)) at(k).fail("unknown key '" + k + "'");
    }
  }
  double number() const {
    if (!value_->is_number()) fail("expected a number");
    return value_->get<double>();
  }
  long integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<long>();
  }
  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }
  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }
  Node array() const {
    if (!value_->is_array()) fail("expected an array");
    return *this;
  }
  Vector vector(long expected = -1) const {
    array();
    if (expected >= 0 && static_cast<long>(size()) != expected) {
      fail("expected " + std::to_string(expected) + " entries, got " + std::to_string(size()));
    }
    Vector v(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = (*this)[i].number();
    return v;
  }
  /// Row-major nested arrays.
  Matrix matrix(long rows, long cols) const {
    array();
    if (static_cast<long>(size()) != rows) fail("expected " + std::to_string(rows) + " rows");
    Matrix a(rows, cols);
    for (long r = 0; r < rows; ++r) a.row(r) = (*this)[static_cast<std::size_t>(r)].vector(cols).transpose();
    return a;
  }
  template <typename Enum>
  Enum choice(std::initializer_list<std::pair<const char*, Enum>> options) const {
    const std::string s = string();
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail("unknown value '" + s + "' (expected one of " + names + ")");
  }

 private:
  const json* value_;
  std::string path_;
  const LineMap* lines_;
};

RowSense parse_sense(const Node& n) {
  return n.choice<RowSense>({{"<=", RowSense::kLessEqual}, {"==", RowSense::kEqual}, {">=", RowSense::kGreaterEqual}});
}

BoxRegion parse_box(const Node& n, int m) {
  n.allow_keys({"lower", "upper"});
  return {n.at("lower").vector(m), n.at("upper").vector(m)};
}

double parse_step_node(const Node& n) {
  if (n.is_string()) {
    try {
      return parse_step(n.string());
    } catch (const std::invalid_argument& e) {
      n.fail(e.what());
    }
  }
  const double d = n.number();
  if (!(d > 0)) n.fail("lattice step must be positive");
  return d;
}

AmbiguitySpec parse_ambiguity(const Node& n) {
  n.allow_keys({"dim", "domain_edge", "mean", "covariance", "eps_mu", "eps_sigma", "threshold", "confidence_sets"});
  AmbiguitySpec spec;
  const Node dim = n.at("dim");
  spec.dim = static_cast<int>(dim.integer());
  if (spec.dim <= 0) dim.fail("dimension must be positive");
  spec.domain_edge = n.at("domain_edge").number();
  spec.mean = n.at("mean").vector(spec.dim);
  spec.cov = n.at("covariance").matrix(spec.dim, spec.dim);
  spec.eps_mu = n.at("eps_mu").number();
  spec.eps_sigma = n.at("eps_sigma").number();
  spec.threshold = n.at("threshold").number();
  const Node sets = n.at("confidence_sets").array();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const Node cs = sets[i];
    cs.allow_keys({"region", "eps"});
    ConfidenceSet set;
    const Node region = cs.at("region");
    if (region.is_string()) {
      if (region.string() != "domain") region.fail("region must be \"domain\" or a box {lower, upper}");
      set.region = WholeDomain{};
    } else {
      set.region = parse_box(region, spec.dim);
    }
    set.eps = cs.at("eps").number();
    spec.confidence_sets.push_back(std::move(set));
  }
  return spec;
}

SimpleFunctionSpec parse_function(const Node& n, int m) {
  n.allow_keys({"heights", "boxes", "height_polytope", "objective", "box_rows"});
  SimpleFunctionSpec fn;
  fn.heights = n.at("heights").vector();
  const long k = fn.heights.size();
  const Node boxes = n.at("boxes");
  if (boxes.is_string()) {
    if (boxes.string() != "variable") boxes.fail("boxes must be \"variable\" or a list of boxes");
    if (n.has("height_polytope")) n.at("height_polytope").fail("height_polytope needs fixed boxes");
    VariableBoxes var;
    var.c_minus = Matrix::Zero(k, m);
    var.c_plus = Matrix::Zero(k, m);
    if (const auto obj = n.get("objective")) {
      obj->allow_keys({"kind", "maximize", "c_minus", "c_plus"});
      var.objective = obj->at("kind").choice<VariableBoxes::Objective>(
          {{"width_sum", VariableBoxes::Objective::kWidthSum}, {"linear", VariableBoxes::Objective::kLinear}});
      if (const auto mx = obj->get("maximize")) var.maximize = mx->boolean();
      if (var.objective == VariableBoxes::Objective::kLinear) {
        var.c_minus = obj->at("c_minus").matrix(k, m);
        var.c_plus = obj->at("c_plus").matrix(k, m);
      }
    }
    if (const auto rows = n.get("box_rows")) {
      rows->array();
      for (std::size_t r = 0; r < rows->size(); ++r) {
        const Node row = (*rows)[r];
        row.allow_keys({"coeff_minus", "coeff_plus", "sense", "rhs"});
        var.box_rows.push_back({row.at("coeff_minus").matrix(k, m), row.at("coeff_plus").matrix(k, m),
                                parse_sense(row.at("sense")), row.at("rhs").number()});
      }
    }
    fn.mode = std::move(var);
    return fn;
  }
  if (n.has("objective")) n.at("objective").fail("objective needs variable boxes");
  if (n.has("box_rows")) n.at("box_rows").fail("box_rows needs variable boxes");
  FixedBoxes fixed;
  boxes.array();
  for (std::size_t i = 0; i < boxes.size(); ++i) fixed.boxes.push_back(parse_box(boxes[i], m));
  if (const auto poly = n.get("height_polytope")) {
    poly->allow_keys({"objective", "rows"});
    FixedBoxes::HeightPolytope hp;
    hp.objective = poly->at("objective").vector(k);
    const Node rows = poly->at("rows").array();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Node row = rows[r];
      row.allow_keys({"coeffs", "sense", "rhs"});
      hp.rows.push_back({row.at("coeffs").vector(k), parse_sense(row.at("sense")), row.at("rhs").number()});
    }
    fixed.free_heights = std::move(hp);
  }
  fn.mode = std::move(fixed);
  return fn;
}

void parse_search(const Node& n, SearchOptions& s) {
  n.allow_keys({"mode", "node_limit", "time_limit", "gap_tol", "branching", "feas_tol", "log_every"});
  if (const auto v = n.get("mode")) {
    s.mode = v->choice<SearchOptions::Mode>({{"bnb", SearchOptions::Mode::kBnb},
                                             {"enumerate", SearchOptions::Mode::kEnumerate},
                                             {"both", SearchOptions::Mode::kBoth}});
  }
  if (const auto v = n.get("node_limit")) s.node_limit = v->integer();
  if (const auto v = n.get("time_limit")) s.time_limit = v->number();
  if (const auto v = n.get("gap_tol")) s.gap_tol = v->number();
  if (const auto v = n.get("feas_tol")) s.feas_tol = v->number();
  if (const auto v = n.get("log_every")) s.log_every = v->integer();
  if (const auto v = n.get("branching")) {
    s.branching = v->choice<SearchOptions::Branching>({{"line_guided", SearchOptions::Branching::kLineGuided},
                                                       {"most_fractional", SearchOptions::Branching::kMostFractional}});
  }
}

void parse_solver(const Node& n, SolverOptions& s) {
  n.allow_keys({"max_iterations", "feastol", "abstol", "reltol", "stall_factor"});
  if (const auto v = n.get("max_iterations")) s.max_iterations = static_cast<int>(v->integer());
  if (const auto v = n.get("feastol")) s.feastol = v->number();
  if (const auto v = n.get("abstol")) s.abstol = v->number();
  if (const auto v = n.get("reltol")) s.reltol = v->number();
  if (const auto v = n.get("stall_factor")) s.stall_factor = v->number();
}

void parse_certify(const Node& n, CertifyOptions& c) {
  n.allow_keys({"fine_delta", "samples", "seed", "tol"});
  if (const auto v = n.get("fine_delta")) c.fine_delta = parse_step_node(*v);
  if (const auto v = n.get("samples")) c.samples = static_cast<int>(v->integer());
  if (const auto v = n.get("seed")) c.seed = static_cast<std::uint64_t>(v->integer());
  if (const auto v = n.get("tol")) c.tol = v->number();
}

}  // namespace

double parse_step(const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      const std::string num = text.substr(0, slash), den = text.substr(slash + 1);
      const double p = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(text);
      const double q = std::stod(den, &used);
      if (used != den.size() || q == 0.0) throw std::invalid_argument(text);
      value = p / q;
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot read lattice step '" + text + "'");
  }
  if (!(value > 0)) throw std::invalid_argument("lattice step must be positive");
  return value;
}

RunConfig parse_config(const std::string& text) {
  LineMap lines;
  ReadState state;
  LineRecorder recorder(&state, &lines);
  if (!json::sax_parse(CountingIterator(&text, 0, &state), CountingIterator(&text, text.size(), &state), &recorder)) {
    throw ConfigError(line_at(text, recorder.error_position), recorder.error_message);
  }
  const json doc = json::parse(text);
  const Node root(&doc, "", &lines);
  root.allow_keys({"ambiguity", "function", "lattice", "tolerances", "search", "solver", "certify", "output"});

  RunConfig cfg;
  cfg.spec = parse_ambiguity(root.at("ambiguity"));
  cfg.fn = parse_function(root.at("function"), cfg.spec.dim);

  const Node lattice = root.at("lattice");
  lattice.allow_keys({"delta", "deltas"});
  if (lattice.has("delta") == lattice.has("deltas")) lattice.fail("give exactly one of 'delta' and 'deltas'");
  if (const auto d = lattice.get("delta")) {
    cfg.deltas.push_back(parse_step_node(*d));
  } else {
    const Node list = lattice.at("deltas").array();
    if (list.size() == 0) list.fail("'deltas' must not be empty");
    for (std::size_t i = 0; i < list.size(); ++i) cfg.deltas.push_back(parse_step_node(list[i]));
  }
  if (const auto t = root.get("tolerances")) {
    t->allow_keys({"alignment", "psd"});
    if (const auto v = t->get("alignment")) cfg.tol.alignment = v->number();
    if (const auto v = t->get("psd")) cfg.tol.psd = v->number();
  }
  if (const auto s = root.get("search")) parse_search(*s, cfg.search);
  if (const auto s = root.get("solver")) {
    parse_solver(*s, cfg.search.solver);
    cfg.certify.solver = cfg.search.solver;
  }
  if (const auto c = root.get("certify")) parse_certify(*c, cfg.certify);
  if (const auto o = root.get("output")) {
    o->allow_keys({"dir"});
    if (const auto d = o->get("dir")) cfg.out_dir = d->string();
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace safedro
