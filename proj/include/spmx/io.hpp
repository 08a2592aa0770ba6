#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spmx/metrics.hpp"
#include "spmx/types.hpp"

namespace spmx {

// Array container: one newline-terminated JSON header line
//   {"magic":"SPMX1","dtype":"f32"|"u16","order":"C","dims":[C,Z,Y,X],
//    "axes":["L"|"F","Z","Y","X"],"meta":{...}}
// followed by the raw little-endian payload in C order.
inline constexpr const char* kContainerMagic = "SPMX1";

struct ContainerHeader {
  std::string dtype = "f32";
  std::vector<std::size_t> dims;
  std::vector<std::string> axes;
  Json meta = Json::object();

  Json to_json() const;
};

struct Container {
  Tensor4 tensor;
  ContainerHeader header;
};

// dims are filled from the tensor when left empty. u16 payloads require
// integral values in [0, 65535]; f32 payloads round to nearest.
void write_container(const std::filesystem::path& path, const Tensor4& tensor,
                     const ContainerHeader& header);
Container read_container(const std::filesystem::path& path);

std::size_t dtype_size(const std::string& dtype);

// Typed wrappers. Spectral images carry their band layout in meta.layout,
// concentration maps their labels in meta.labels.
void write_spectral(const std::filesystem::path& path, const SpectralImage& s,
                    const std::string& dtype = "f32");
SpectralImage read_spectral(const std::filesystem::path& path);
void write_concentration(const std::filesystem::path& path, const ConcentrationMap& u);
ConcentrationMap read_concentration(const std::filesystem::path& path);

// Report CSV, shared with the bench tables.
inline constexpr const char* kReportHeader =
    "dataset,method,condition_key,condition_value,channel,psnr_ri,ms_ssim_ri,pearson,snr";

struct ReportRow {
  std::string dataset;
  std::string method;
  std::string condition_key;
  std::string condition_value;
  ChannelMetrics metrics;
};

// Per-channel rows followed by the "mean" row.
std::vector<ReportRow> report_rows(const MetricReport& report, const std::string& dataset,
                                   const std::string& method, const std::string& condition_key,
                                   const std::string& condition_value);
std::string format_report_csv(const std::vector<ReportRow>& rows);
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace spmx
