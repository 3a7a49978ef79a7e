#include "fmn/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmn/errors.hpp"

namespace fmn {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Dataset dataset_from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  Dataset data;

  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_commas(view);
    const std::string where = "line " + std::to_string(lineno);

    if (data.input_dim == 0) {
      if (fields.size() < 2 || trim(fields[0]) != "label") throw ParseError(where, "expected header 'label,f0,...'");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (trim(fields[i]) != "f" + std::to_string(i - 1)) throw ParseError(where, "bad header column");
      }
      data.input_dim = fields.size() - 1;
      continue;
    }
    if (fields.size() != data.input_dim + 1) throw ParseError(where, "wrong number of columns");

    Sample s;
    const auto lf = trim(fields[0]);
    auto [lp, lerr] = std::from_chars(lf.data(), lf.data() + lf.size(), s.label);
    if (lerr != std::errc() || lp != lf.data() + lf.size()) throw ParseError(where + " col 0", "bad label");

    std::vector<double> xs(data.input_dim);
    for (std::size_t i = 0; i < data.input_dim; ++i) {
      const auto f = trim(fields[i + 1]);
      auto [p, err] = std::from_chars(f.data(), f.data() + f.size(), xs[i]);
      if (err != std::errc() || p != f.data() + f.size()) {
        throw ParseError(where + " col " + std::to_string(i + 1), "bad number");
      }
      if (!(xs[i] >= 0.0 && xs[i] <= 1.0)) {
        throw ParseError(where + " col " + std::to_string(i + 1), "feature outside [0,1]");
      }
    }
    s.x = Tensor(std::move(xs));
    data.samples.push_back(std::move(s));
  }
  if (data.input_dim == 0) throw ParseError("line 1", "missing header");
  return data;
}

std::string dataset_to_csv_text(const Dataset& data) {
  std::string out = "label";
  for (std::size_t i = 0; i < data.input_dim; ++i) out += ",f" + std::to_string(i);
  out += "\n";
  for (const auto& s : data.samples) {
    out += std::to_string(s.label);
    for (double v : s.x.values()) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open dataset file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_csv_text(ss.str());
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dataset_to_csv_text(data);
}

}  // namespace fmn
