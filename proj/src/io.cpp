#include "kippo/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kippo {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError("bad numeric field '" + s + "'");
  return v;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

void ensure_dir(const fs::path& p) { fs::create_directories(p); }

void atomic_write(const fs::path& p, const std::string& content) {
  ensure_dir(p.parent_path().empty() ? "." : p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw MissingInput("cannot open '" + tmp.string() + "' for writing");
    f << content;
  }
  fs::rename(tmp, p);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw MissingInput("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string CsvTable::to_string() const {
  std::ostringstream ss;
  auto emit = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) ss << ',';
      ss << csv_escape(row[i]);
    }
    ss << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return ss.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

CsvTable read_csv(const fs::path& p) {
  std::string content = slurp(p);
  CsvTable t;
  std::istringstream ss(content);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

std::string render_text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size());
  for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (size_t i = 0; i < r.size() && i < width.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  std::ostringstream ss;
  auto emit = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < width.size(); ++i) {
      std::string cell = i < row.size() ? row[i] : "";
      ss << cell << std::string(width[i] - cell.size(), ' ');
      if (i + 1 < width.size()) ss << "  ";
    }
    ss << '\n';
  };
  emit(header);
  size_t total = 0;
  for (size_t w : width) total += w + 2;
  ss << std::string(total > 2 ? total - 2 : total, '-') << '\n';
  for (const auto& r : rows) emit(r);
  return ss.str();
}

// --- SVG ---------------------------------------------------------------------

namespace {

constexpr double kW = 720, kH = 440;
constexpr double kL = 70, kR = 20, kT = 40, kB = 50;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) hi = lo + 1.0;
  double span = hi - lo;
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> ticks;
  double v = std::ceil(lo / step) * step;
  for (; v <= hi + 1e-9 * span; v += step) ticks.push_back(v);
  return ticks;
}

}  // namespace

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    auto scan = [&](const std::vector<double>& ys) {
      for (double v : ys) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    };
    scan(s.y);
    scan(s.y_lo);
    scan(s.y_hi);
  }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::ostringstream ss;
  ss << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  ss << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH
     << "\" fill=\"white\"/>\n";
  ss << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";

  for (double t : nice_ticks(xmin, xmax)) {
    double x = px(t);
    ss << "<line x1=\"" << num(x) << "\" y1=\"" << num(kH - kB) << "\" x2=\"" << num(x)
       << "\" y2=\"" << num(kT) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    ss << "<text x=\"" << num(x) << "\" y=\"" << num(kH - kB + 18)
       << "\" text-anchor=\"middle\" font-size=\"11\">" << num(t) << "</text>\n";
  }
  for (double t : nice_ticks(ymin, ymax)) {
    double y = py(t);
    ss << "<line x1=\"" << num(kL) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kW - kR)
       << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    ss << "<text x=\"" << num(kL - 6) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << num(t) << "</text>\n";
  }
  ss << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
     << kH - kB << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
     << "\" stroke=\"black\"/>\n";
  ss << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
  ss << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << kH / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  for (const auto& s : series) {
    if (!s.y_lo.empty() && s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size()) {
      ss << "<path d=\"M";
      for (size_t i = 0; i < s.x.size(); ++i)
        ss << num(px(s.x[i])) << " " << num(py(s.y_hi[i])) << (i + 1 < s.x.size() ? " L" : "");
      for (size_t i = s.x.size(); i-- > 0;)
        ss << " L" << num(px(s.x[i])) << " " << num(py(s.y_lo[i]));
      ss << " Z\" fill=\"" << s.color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    ss << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (i) ss << ' ';
      ss << num(px(s.x[i])) << ',' << num(py(s.y[i]));
    }
    ss << "\"/>\n";
  }

  double ly = kT + 8;
  for (const auto& s : series) {
    ss << "<line x1=\"" << kW - kR - 150 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR - 120
       << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    ss << "<text x=\"" << kW - kR - 114 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
       << xml_escape(s.label) << "</text>\n";
    ly += 18;
  }
  ss << "</svg>\n";
  return ss.str();
}

bool validate_svg(const std::string& content, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (content.find("<svg") == std::string::npos) return fail("missing <svg> root");
  if (content.find("</svg>") == std::string::npos) return fail("missing </svg>");
  if (content.find("<polyline") == std::string::npos && content.find("<path") == std::string::npos)
    return fail("no polyline or path element");
  if (content.find("nan") != std::string::npos || content.find("inf") != std::string::npos)
    return fail("non-finite coordinate");
  // tag balance
  std::vector<std::string> stack;
  size_t i = 0;
  while ((i = content.find('<', i)) != std::string::npos) {
    size_t end = content.find('>', i);
    if (end == std::string::npos) return fail("unterminated tag");
    std::string tag = content.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    bool closing = tag[0] == '/';
    bool self_closing = !tag.empty() && tag.back() == '/';
    std::string name = tag.substr(closing ? 1 : 0);
    name = name.substr(0, name.find_first_of(" \t\n/"));
    if (closing) {
      if (stack.empty() || stack.back() != name) return fail("mismatched closing tag " + name);
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
  }
  if (!stack.empty()) return fail("unclosed tag " + stack.back());
  return true;
}

}  // namespace kippo
