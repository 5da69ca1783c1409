#include "rsm/io.hpp"

#include "rsm/error.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <system_error>

namespace rsm {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last || first == last) {
    throw InvalidInput("not a number: '" + s + "'");
  }
  return x;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw ResourceError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string weights_to_string(const Mlp& net) {
  std::string out;
  const auto sizes = net.sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(sizes[i]);
  }
  out += '\n';
  for (const Layer& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        if (c) out += ' ';
        out += format_double(layer.weight(r, c));
      }
      out += '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (r) out += ' ';
      out += format_double(layer.bias[r]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected, int line_no) {
  const auto toks = split_ws(line);
  if (toks.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " values, found " + std::to_string(toks.size()),
                     line_no);
  }
  std::vector<double> out;
  for (const auto& t : toks) {
    try {
      out.push_back(parse_double(t));
    } catch (const InvalidInput&) {
      throw ParseError("not a number: '" + t + "'", line_no);
    }
  }
  return out;
}

}  // namespace

Mlp weights_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", line_no + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  std::vector<int> sizes;
  for (const auto& tok : split_ws(next_line())) {
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 1) {
      throw ParseError("bad layer size '" + tok + "'", line_no);
    }
    sizes.push_back(v);
  }
  if (sizes.size() < 2) throw ParseError("header needs at least two layer sizes", line_no);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in_dim = sizes[l];
    const int out_dim = sizes[l + 1];
    Layer layer{Mat(out_dim, in_dim), Vec(out_dim)};
    for (int r = 0; r < out_dim; ++r) {
      const std::string text = next_line();
      const auto row = parse_row(text, static_cast<std::size_t>(in_dim), line_no);
      for (int c = 0; c < in_dim; ++c) layer.weight(r, c) = row[static_cast<std::size_t>(c)];
    }
    const std::string bias_text = next_line();
    const auto bias = parse_row(bias_text, static_cast<std::size_t>(out_dim), line_no);
    for (int r = 0; r < out_dim; ++r) layer.bias[r] = bias[static_cast<std::size_t>(r)];
    layers.push_back(std::move(layer));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_ws(line).empty()) throw ParseError("trailing data after last layer", line_no);
  }
  try {
    return Mlp(std::move(layers));
  } catch (const Error& e) {
    throw ParseError(e.what(), line_no);
  }
}

void save_weights(const std::filesystem::path& path, const Mlp& net) { write_file_atomic(path, weights_to_string(net)); }

Mlp load_weights(const std::filesystem::path& path) { return weights_from_string(read_file(path)); }

std::string certificate_to_json(const Certificate& cert) {
  nlohmann::ordered_json j;
  j["kind"] = "rsm-certificate";
  j["benchmark"] = cert.benchmark;
  j["architecture"] = cert.network.sizes();
  j["m"] = cert.m;
  j["epsilon"] = cert.epsilon;
  j["K"] = cert.K;
  j["tau"] = cert.tau;
  j["lipschitz_v"] = cert.lipschitz_v;
  j["lipschitz_f"] = cert.lipschitz_f;
  j["lipschitz_pi"] = cert.lipschitz_pi;
  j["slack"] = cert.slack;
  j["seed"] = cert.seed;
  j["cells_per_dim"] = cert.cells_per_dim;
  j["grid_points"] = cert.grid_points;
  j["refined_points"] = cert.refined_points;
  j["iterations"] = cert.iterations;
  j["wall_seconds"] = cert.wall_seconds;
  j["weights"] = weights_to_string(cert.network);
  return j.dump(2) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("certificate: ") + e.what());
  }
  try {
    if (j.at("kind").get<std::string>() != "rsm-certificate") throw InvalidInput("certificate: wrong kind");
    Certificate c;
    c.benchmark = j.at("benchmark").get<std::string>();
    c.m = j.at("m").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.K = j.at("K").get<double>();
    c.tau = j.at("tau").get<double>();
    c.lipschitz_v = j.at("lipschitz_v").get<double>();
    c.lipschitz_f = j.at("lipschitz_f").get<double>();
    c.lipschitz_pi = j.at("lipschitz_pi").get<double>();
    c.slack = j.at("slack").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.cells_per_dim = j.at("cells_per_dim").get<int>();
    c.grid_points = j.at("grid_points").get<std::size_t>();
    c.refined_points = j.at("refined_points").get<std::size_t>();
    c.iterations = j.at("iterations").get<int>();
    c.wall_seconds = j.at("wall_seconds").get<double>();
    c.network = weights_from_string(j.at("weights").get<std::string>());
    if (c.network.sizes() != j.at("architecture").get<std::vector<int>>()) {
      throw InvalidInput("certificate: architecture does not match weights");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("certificate: ") + e.what());
  }
}

void save_certificate(const std::filesystem::path& path, const Certificate& cert) {
  write_file_atomic(path, certificate_to_json(cert));
}

Certificate load_certificate(const std::filesystem::path& path) { return certificate_from_json(read_file(path)); }

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InvalidInput("csv row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
}

}  // namespace rsm
