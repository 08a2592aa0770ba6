#include "spmx/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spmx/error.hpp"
#include "text_util.hpp"

namespace spmx {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container payloads are written in host order; big-endian hosts are unsupported");

const char* const kAxisNames[] = {"Z", "Y", "X"};

void check_header(const ContainerHeader& h) {
  if (h.dtype != "f32" && h.dtype != "u16")
    fail(ErrorKind::UnsupportedDtype, "unsupported dtype '" + h.dtype + "'");
  if (h.dims.size() != 4 || h.axes.size() != 4)
    fail(ErrorKind::HeaderMismatch, "container must have 4 dims and 4 axes");
  if (h.axes[0] != "L" && h.axes[0] != "F")
    fail(ErrorKind::HeaderMismatch, "first axis must be \"L\" or \"F\"");
  for (std::size_t i = 0; i < 3; ++i)
    if (h.axes[i + 1] != kAxisNames[i])
      fail(ErrorKind::HeaderMismatch, "axes must be [L|F, Z, Y, X]");
}

}  // namespace

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "u16") return 2;
  fail(ErrorKind::UnsupportedDtype, "unsupported dtype '" + dtype + "'");
}

Json ContainerHeader::to_json() const {
  return Json{{"magic", kContainerMagic}, {"dtype", dtype}, {"order", "C"},
              {"dims", dims},             {"axes", axes},   {"meta", meta}};
}

void write_container(const std::filesystem::path& path, const Tensor4& tensor,
                     const ContainerHeader& header) {
  ContainerHeader h = header;
  const Shape& s = tensor.shape();
  const std::vector<std::size_t> dims{s.channels, s.z, s.y, s.x};
  if (h.dims.empty()) h.dims = dims;
  if (h.axes.empty()) h.axes = {"L", "Z", "Y", "X"};
  check_header(h);
  if (h.dims != dims) fail(ErrorKind::HeaderMismatch, "header dims differ from tensor shape");

  const auto values = tensor.values();
  std::string payload(values.size() * dtype_size(h.dtype), '\0');
  if (h.dtype == "f32") {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto f = static_cast<float>(values[i]);
      std::memcpy(&payload[i * 4], &f, 4);
    }
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      if (!(v >= 0.0 && v <= 65535.0) || v != std::floor(v))
        fail(ErrorKind::HeaderMismatch, "u16 container needs integral values in [0, 65535]");
      const auto u = static_cast<std::uint16_t>(v);
      std::memcpy(&payload[i * 2], &u, 2);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << h.to_json().dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::BadMagic, path.string() + ": empty file");
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception&) {
    fail(ErrorKind::BadMagic, path.string() + ": header is not a JSON line");
  }
  if (!j.is_object() || !j.contains("magic") || j["magic"] != kContainerMagic)
    fail(ErrorKind::BadMagic, path.string() + ": bad magic");

  Container c;
  try {
    c.header.dtype = j.at("dtype").get<std::string>();
    if (j.value("order", std::string("C")) != "C")
      fail(ErrorKind::HeaderMismatch, "only C order is supported");
    c.header.dims = j.at("dims").get<std::vector<std::size_t>>();
    c.header.axes = j.at("axes").get<std::vector<std::string>>();
    c.header.meta = j.value("meta", Json::object());
  } catch (const Json::exception& e) {
    fail(ErrorKind::HeaderMismatch, path.string() + ": malformed header: " + e.what());
  }
  check_header(c.header);

  const Shape shape{c.header.dims[0], c.header.dims[1], c.header.dims[2], c.header.dims[3]};
  const std::size_t width = dtype_size(c.header.dtype);
  std::string payload(shape.size() * width, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    fail(ErrorKind::TruncatedPayload, path.string() + ": payload has " +
                                          std::to_string(in.gcount()) + " of " +
                                          std::to_string(payload.size()) + " bytes");

  std::vector<double> values(shape.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (width == 4) {
      float f;
      std::memcpy(&f, &payload[i * 4], 4);
      values[i] = f;
    } else {
      std::uint16_t u;
      std::memcpy(&u, &payload[i * 2], 2);
      values[i] = u;
    }
  }
  c.tensor = Tensor4(shape, std::move(values));
  return c;
}

void write_spectral(const std::filesystem::path& path, const SpectralImage& s,
                    const std::string& dtype) {
  ContainerHeader h;
  h.dtype = dtype;
  h.axes = {"L", "Z", "Y", "X"};
  h.meta = s.meta.is_object() ? s.meta : Json::object();
  if (s.layout.size() > 0) h.meta["layout"] = s.layout.to_json();
  write_container(path, s.data, h);
}

SpectralImage read_spectral(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.header.axes[0] != "L")
    fail(ErrorKind::HeaderMismatch, path.string() + ": expected a spectral (L) container");
  SpectralImage s{std::move(c.tensor), {}, std::move(c.header.meta)};
  if (s.meta.contains("layout")) {
    s.layout = BandLayout::from_json(s.meta["layout"]);
    s.meta.erase("layout");
    if (s.layout.size() != s.bands())
      fail(ErrorKind::HeaderMismatch, path.string() + ": layout length differs from L");
  }
  return s;
}

void write_concentration(const std::filesystem::path& path, const ConcentrationMap& u) {
  ContainerHeader h;
  h.axes = {"F", "Z", "Y", "X"};
  h.meta = u.meta.is_object() ? u.meta : Json::object();
  if (!u.labels.empty()) h.meta["labels"] = u.labels;
  write_container(path, u.data, h);
}

ConcentrationMap read_concentration(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.header.axes[0] != "F")
    fail(ErrorKind::HeaderMismatch, path.string() + ": expected a concentration (F) container");
  ConcentrationMap u{std::move(c.tensor), {}, std::move(c.header.meta)};
  if (u.meta.contains("labels")) {
    u.labels = u.meta["labels"].get<std::vector<std::string>>();
    u.meta.erase("labels");
    if (u.labels.size() != u.fluorophores())
      fail(ErrorKind::HeaderMismatch, path.string() + ": label count differs from F");
  }
  return u;
}

std::vector<ReportRow> report_rows(const MetricReport& report, const std::string& dataset,
                                   const std::string& method, const std::string& condition_key,
                                   const std::string& condition_value) {
  std::vector<ReportRow> rows;
  for (const auto& cm : report.per_channel)
    rows.push_back({dataset, method, condition_key, condition_value, cm});
  rows.push_back({dataset, method, condition_key, condition_value, report.mean});
  rows.back().metrics.channel = "mean";
  return rows;
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::string out = kReportHeader;
  out += '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += r.dataset + ',' + r.method + ',' + r.condition_key + ',' + r.condition_value + ',' +
           m.channel + ',' + detail::format_double(m.psnr_ri) + ',' +
           detail::format_double(m.ms_ssim_ri) + ',' + detail::format_double(m.pearson) + ',' +
           detail::format_double(m.snr) + '\n';
  }
  return out;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  write_text(path, format_report_csv(rows));
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kReportHeader)
    fail(ErrorKind::InvalidConfig, path.string() + ": unexpected report header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) fail(ErrorKind::InvalidConfig, path.string() + ": expected 9 fields");
    ReportRow r{f[0], f[1], f[2], f[3], {}};
    r.metrics.channel = f[4];
    double* targets[] = {&r.metrics.psnr_ri, &r.metrics.ms_ssim_ri, &r.metrics.pearson,
                         &r.metrics.snr};
    for (std::size_t k = 0; k < 4; ++k)
      if (!detail::parse_double(f[5 + k], *targets[k]))
        fail(ErrorKind::InvalidConfig, path.string() + ": bad number '" + f[5 + k] + "'");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidConfig, path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace spmx
