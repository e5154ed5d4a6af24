#include "survkit/serialize.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "survkit/errors.hpp"
#include "survkit/text.hpp"

namespace survkit::serialize {

namespace {

using pipeline::FittedModel;
using pipeline::LinearSurvivalModel;
using pipeline::ModelKind;

std::string format_u64(std::uint64_t value) {
  char buf[24];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

void write_doubles(std::ostream& out, std::string_view tag, const std::vector<double>& values) {
  out << tag << ' ' << format_int(static_cast<long long>(values.size()));
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

void write_doubles(std::ostream& out, std::string_view tag, const Eigen::VectorXd& values) {
  std::vector<double> copy(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) copy[static_cast<std::size_t>(i)] = values[i];
  write_doubles(out, tag, copy);
}

void write_step(std::ostream& out, std::string_view tag, const StepFunction& fn) {
  out << tag << ' ' << format_double(fn.initial_value()) << ' '
      << format_int(static_cast<long long>(fn.knots().size())) << '\n';
  for (std::size_t i = 0; i < fn.knots().size(); ++i) {
    out << format_double(fn.knots()[i]) << ' ' << format_double(fn.values()[i]) << '\n';
  }
}

void write_features(std::ostream& out, const std::vector<std::string>& names,
                    const linmodels::ImputeStats& impute) {
  out << "features " << format_int(static_cast<long long>(names.size())) << '\n';
  for (const auto& name : names) out << name << '\n';
  write_doubles(out, "impute", impute.fill_values);
}

// --- reading -----------------------------------------------------------

struct Reader {
  std::istream& in;
  int line_no = 0;

  std::string next_line() {
    std::string line;
    if (!std::getline(in, line)) {
      raise(ErrorCode::BadFormat, "model file ends early at line " + format_int(line_no + 1));
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  [[noreturn]] void fail(const std::string& what) {
    raise(ErrorCode::BadFormat, what + " at line " + format_int(line_no));
  }

  std::vector<std::string_view> tokens(const std::string& line) {
    std::vector<std::string_view> out;
    std::string_view rest = line;
    while (!rest.empty()) {
      const auto cut = rest.find(' ');
      out.push_back(rest.substr(0, cut));
      if (cut == std::string_view::npos) break;
      rest.remove_prefix(cut + 1);
    }
    return out;
  }

  double as_double(std::string_view field) {
    const auto v = parse_double(field);
    if (!v) fail("expected a number, got '" + std::string(field) + "'");
    return *v;
  }

  long long as_int(std::string_view field) {
    const auto v = parse_int(field);
    if (!v) fail("expected an integer, got '" + std::string(field) + "'");
    return *v;
  }

  std::uint64_t as_u64(std::string_view field) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      fail("expected an unsigned integer, got '" + std::string(field) + "'");
    }
    return value;
  }

  // `tag <count> v1 ... vcount`
  std::vector<double> read_doubles(std::string_view tag) {
    const std::string line = next_line();
    const auto t = tokens(line);
    if (t.size() < 2 || t[0] != tag) fail("expected '" + std::string(tag) + " <count> ...'");
    const auto count = as_int(t[1]);
    if (count < 0 || static_cast<std::size_t>(count) != t.size() - 2) {
      fail("'" + std::string(tag) + "' declares " + format_int(count) + " values but carries " +
           format_int(static_cast<long long>(t.size()) - 2));
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count));
    for (std::size_t i = 2; i < t.size(); ++i) values.push_back(as_double(t[i]));
    return values;
  }

  StepFunction read_step(std::string_view tag) {
    const std::string head = next_line();
    const auto t = tokens(head);
    if (t.size() != 3 || t[0] != tag) fail("expected '" + std::string(tag) + " <initial> <count>'");
    const double initial = as_double(t[1]);
    const auto count = as_int(t[2]);
    std::vector<double> knots, values;
    for (long long i = 0; i < count; ++i) {
      const std::string line = next_line();
      const auto kv = tokens(line);
      if (kv.size() != 2) fail("expected '<knot> <value>'");
      knots.push_back(as_double(kv[0]));
      values.push_back(as_double(kv[1]));
    }
    return StepFunction(std::move(knots), std::move(values), initial);
  }

  void read_features(std::vector<std::string>& names, linmodels::ImputeStats& impute) {
    const std::string head = next_line();
    const auto t = tokens(head);
    if (t.size() != 2 || t[0] != "features") fail("expected 'features <count>'");
    const auto count = as_int(t[1]);
    if (count < 0) fail("negative feature count");
    names.clear();
    for (long long i = 0; i < count; ++i) names.push_back(next_line());
    impute.column_names = names;
    impute.fill_values = read_doubles("impute");
    if (impute.fill_values.size() != names.size()) {
      fail("impute width does not match the feature count");
    }
  }

  void expect(std::string_view literal) {
    const std::string line = next_line();
    if (line != literal) fail("expected '" + std::string(literal) + "', got '" + line + "'");
  }
};

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

void write_linear(std::ostream& out, const LinearSurvivalModel& model) {
  write_features(out, model.feature_names, model.impute);
  write_doubles(out, "means", model.feature_means);
  write_doubles(out, "coefficients", model.coefficients);
  write_step(out, "baseline", model.baseline);
}

LinearSurvivalModel read_linear(Reader& r) {
  LinearSurvivalModel model;
  r.read_features(model.feature_names, model.impute);
  model.feature_means = to_vector(r.read_doubles("means"));
  model.coefficients = to_vector(r.read_doubles("coefficients"));
  if (model.feature_means.size() != static_cast<Eigen::Index>(model.feature_names.size()) ||
      model.coefficients.size() != model.feature_means.size()) {
    r.fail("coefficient widths do not match the feature count");
  }
  model.baseline = r.read_step("baseline");
  return model;
}

void write_forest(std::ostream& out, const forest::SurvivalForest& f) {
  write_features(out, f.feature_names, f.impute);
  write_doubles(out, "grid", f.grid);
  const auto& p = f.params;
  out << "params " << format_int(p.n_trees) << ' ' << format_int(p.mtry) << ' '
      << format_int(p.min_node_size) << ' ' << format_int(p.min_events_per_node) << ' '
      << format_u64(p.master_seed) << ' '
      << (p.sample_mode == forest::SampleMode::bootstrap ? "bootstrap" : "identity") << '\n';
  out << "trees " << format_int(static_cast<long long>(f.trees.size())) << '\n';
  for (const auto& tree : f.trees) {
    out << "tree " << format_int(static_cast<long long>(tree.nodes.size())) << '\n';
    for (const auto& node : tree.nodes) {
      out << "node " << format_int(node.feature) << ' ' << format_double(node.threshold) << ' '
          << (node.missing_goes_left ? '1' : '0') << ' ' << format_int(node.left) << ' '
          << format_int(node.right) << ' ' << format_int(node.n_members) << ' '
          << format_int(node.n_events) << '\n';
      if (node.is_leaf()) write_doubles(out, "chf", node.chf);
    }
  }
}

forest::SurvivalForest read_forest(Reader& r) {
  forest::SurvivalForest f;
  r.read_features(f.feature_names, f.impute);
  f.grid = r.read_doubles("grid");

  {
    const std::string line = r.next_line();
    const auto t = r.tokens(line);
    if (t.size() != 7 || t[0] != "params") r.fail("expected 'params' with six fields");
    f.params.n_trees = static_cast<int>(r.as_int(t[1]));
    f.params.mtry = static_cast<int>(r.as_int(t[2]));
    f.params.min_node_size = static_cast<int>(r.as_int(t[3]));
    f.params.min_events_per_node = static_cast<int>(r.as_int(t[4]));
    f.params.master_seed = r.as_u64(t[5]);
    if (t[6] == "bootstrap") {
      f.params.sample_mode = forest::SampleMode::bootstrap;
    } else if (t[6] == "identity") {
      f.params.sample_mode = forest::SampleMode::identity;
    } else {
      r.fail("unknown sample mode '" + std::string(t[6]) + "'");
    }
    f.params.n_threads = 1;
  }

  const std::string trees_line = r.next_line();
  const auto trees_t = r.tokens(trees_line);
  if (trees_t.size() != 2 || trees_t[0] != "trees") r.fail("expected 'trees <count>'");
  const auto n_trees = r.as_int(trees_t[1]);
  for (long long t = 0; t < n_trees; ++t) {
    const std::string tree_line = r.next_line();
    const auto tree_t = r.tokens(tree_line);
    if (tree_t.size() != 2 || tree_t[0] != "tree") r.fail("expected 'tree <node count>'");
    const auto n_nodes = r.as_int(tree_t[1]);
    forest::SurvivalTree tree;
    for (long long n = 0; n < n_nodes; ++n) {
      const std::string node_line = r.next_line();
      const auto nt = r.tokens(node_line);
      if (nt.size() != 8 || nt[0] != "node") r.fail("expected 'node' with seven fields");
      forest::TreeNode node;
      node.feature = static_cast<int>(r.as_int(nt[1]));
      node.threshold = r.as_double(nt[2]);
      node.missing_goes_left = nt[3] == "1";
      node.left = static_cast<int>(r.as_int(nt[4]));
      node.right = static_cast<int>(r.as_int(nt[5]));
      node.n_members = static_cast<int>(r.as_int(nt[6]));
      node.n_events = static_cast<int>(r.as_int(nt[7]));
      if (node.is_leaf()) {
        node.chf = r.read_doubles("chf");
        if (node.chf.size() != f.grid.size()) r.fail("leaf hazard width does not match the grid");
      }
      tree.nodes.push_back(std::move(node));
    }
    f.trees.push_back(std::move(tree));
  }
  return f;
}

ModelKind kind_from_name(Reader& r, std::string_view name) {
  for (const ModelKind kind : {ModelKind::tree, ModelKind::forest, ModelKind::cox,
                               ModelKind::elastic_net, ModelKind::boosted}) {
    if (pipeline::model_name(kind) == name) return kind;
  }
  r.fail("unknown model kind '" + std::string(name) + "'");
}

bool is_forest_kind(ModelKind kind) {
  return kind == ModelKind::tree || kind == ModelKind::forest;
}

}  // namespace

void write_model(const FittedModel& model, std::ostream& out) {
  out << "survkit-model " << format_int(kFormatVersion) << '\n';
  out << "kind " << pipeline::model_name(model.kind) << '\n';
  if (is_forest_kind(model.kind)) {
    write_forest(out, model.forest_model);
  } else {
    write_linear(out, model.linear_model);
  }
  out << "end\n";
}

FittedModel read_model(std::istream& in) {
  Reader r{in};

  const std::string magic = r.next_line();
  const auto mt = r.tokens(magic);
  if (mt.size() != 2 || mt[0] != "survkit-model") {
    r.fail("not a survkit model file (missing magic header)");
  }
  if (r.as_int(mt[1]) != kFormatVersion) {
    r.fail("unsupported format version " + std::string(mt[1]));
  }

  const std::string kind_line = r.next_line();
  const auto kt = r.tokens(kind_line);
  if (kt.size() != 2 || kt[0] != "kind") r.fail("expected 'kind <model>'");

  FittedModel model;
  model.kind = kind_from_name(r, kt[1]);
  if (is_forest_kind(model.kind)) {
    model.forest_model = read_forest(r);
  } else {
    model.linear_model = read_linear(r);
  }
  r.expect("end");
  return model;
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
  if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_model(model, out);
  out.flush();
  if (!out) raise(ErrorCode::IoError, "failed while writing '" + path + "'");
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_model(in);
}

}  // namespace survkit::serialize
