#include "jointrecon/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <png.h>

#include <json.hpp>

#include "jointrecon/grid_io.hpp"

namespace jointrecon {

namespace fs = std::filesystem;

namespace {

struct ResultFile {
  std::string sample, method, modality;
  fs::path path, truth;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

std::vector<ResultFile> scan(const std::vector<fs::path>& runs) {
  std::vector<ResultFile> found;
  for (const auto& run : runs) {
    if (!fs::is_directory(run)) throw MissingInputError("run directory not found: " + run.string());
    for (const auto& entry : fs::recursive_directory_iterator(run)) {
      if (!entry.is_regular_file()) continue;
      const auto name = entry.path().filename().string();
      if (name.rfind("truth_", 0) == 0) continue;
      for (const char* modality : {"pet", "mri"}) {
        const std::string suffix = std::string("_") + modality + ".jrg";
        if (name.size() <= suffix.size() ||
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
          continue;
        }
        ResultFile r;
        r.method = name.substr(0, name.size() - suffix.size());
        r.modality = modality;
        r.sample = fs::relative(entry.path().parent_path(), run).generic_string();
        r.path = entry.path();
        r.truth = entry.path().parent_path() / (std::string("truth_") + modality + ".jrg");
        found.push_back(std::move(r));
      }
    }
  }
  return found;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

RealGrid display_values(const fs::path& path, double scale) {
  auto g = load_grid(path);
  if (auto* r = std::get_if<RealGrid>(&g)) return *r / scale;
  return std::get<ComplexGrid>(g).cwiseAbs() / scale;
}

}  // namespace

std::vector<MetricRow> collect_metrics(const std::vector<fs::path>& runs) {
  const auto found = scan(runs);
  if (found.empty()) throw ReportError("report: no reconstruction results found");
  std::set<std::string> absent;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& r : found) {
    if (!fs::exists(r.truth)) absent.insert(r.truth.string());
    if (!seen.insert({r.sample, r.method, r.modality}).second) {
      throw ReportError("report: duplicate result for sample " + r.sample + ", method " + r.method +
                        ", modality " + r.modality);
    }
  }
  if (!absent.empty()) {
    std::string list;
    for (const auto& a : absent) list += "\n  " + a;
    throw ReportError("report: missing ground truth:" + list);
  }

  std::vector<MetricRow> rows;
  for (const auto& r : found) {
    ImageScores s;
    if (r.modality == "pet") {
      s = score_pet(load_real_grid(r.path), load_real_grid(r.truth));
    } else {
      s = score_mri(load_complex_grid(r.path), load_complex_grid(r.truth));
    }
    rows.push_back({r.sample, r.method, r.modality, s.psnr_db, s.ssim, s.nrmse});
  }
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.sample, a.method, a.modality) < std::tie(b.sample, b.method, b.modality);
  });
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::array<std::vector<double>, 3>> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.method, r.modality}];
    g[0].push_back(r.psnr_db);
    g[1].push_back(r.ssim);
    g[2].push_back(r.nrmse);
  }
  std::vector<SummaryRow> out;
  const char* names[3] = {"psnr_db", "ssim", "nrmse"};
  for (const auto& [key, values] : groups) {
    for (int k = 0; k < 3; ++k) {
      out.push_back({key.first, key.second, names[k], mean_of(values[static_cast<std::size_t>(k)]),
                     std_of(values[static_cast<std::size_t>(k)]),
                     static_cast<int>(values[static_cast<std::size_t>(k)].size())});
    }
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "sample,method,modality,psnr_db,ssim,nrmse\n";
  for (const auto& r : rows) {
    out << r.sample << ',' << r.method << ',' << r.modality << ',' << fmt(r.psnr_db) << ','
        << fmt(r.ssim) << ',' << fmt(r.nrmse) << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "method,modality,metric,mean,std,n\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.modality << ',' << r.metric << ',' << fmt(r.mean) << ','
        << fmt(r.std) << ',' << r.n << '\n';
  }
  return out.str();
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-4s %-8s %12s %10s %4s\n", "method", "mod", "metric",
                "mean", "std", "n");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %-4s %-8s %12.4f %10.4f %4d\n", r.method.c_str(),
                  r.modality.c_str(), r.metric.c_str(), r.mean, r.std, r.n);
    out << line;
  }
  return out.str();
}

void write_png(const GrayImage& image, const fs::path& path) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height)) {
    throw ReportError("png: pixel buffer does not match the image size");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw ReportError("png: cannot write " + path.string() + ": " + png.message);
  }
}

GrayImage read_png(const fs::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw FormatError("png: cannot read " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(png.width);
  out.height = static_cast<int>(png.height);
  out.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, out.pixels.data(), 0, nullptr)) {
    throw FormatError("png: cannot decode " + path.string() + ": " + png.message);
  }
  return out;
}

namespace {

// Renders one modality's montage and returns its sidecar description.
nlohmann::ordered_json render_montage(const std::vector<ResultFile>& results,
                                      const std::string& modality, const fs::path& png_path) {
  std::vector<std::string> samples, methods;
  std::map<std::pair<std::string, std::string>, fs::path> cell;
  std::map<std::string, fs::path> truth;
  for (const auto& r : results) {
    if (r.modality != modality) continue;
    cell[{r.sample, r.method}] = r.path;
    truth[r.sample] = r.truth;
    samples.push_back(r.sample);
    methods.push_back(r.method);
  }
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  std::vector<std::string> row_labels{"truth"};
  for (const auto& m : methods) row_labels.push_back(m);
  for (const auto& m : methods) row_labels.push_back("error:" + m);

  int tile = -1;
  std::vector<std::vector<RealGrid>> panels(row_labels.size(), std::vector<RealGrid>(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c) {
    const RealGrid t_raw = display_values(truth[samples[c]], 1.0);
    if (t_raw.rows() != t_raw.cols()) throw ReportError("report: montage tiles must be square");
    if (tile < 0) tile = static_cast<int>(t_raw.rows());
    if (t_raw.rows() != tile) throw ReportError("report: samples differ in image size");
    const double top = t_raw.maxCoeff() > 0.0 ? t_raw.maxCoeff() : 1.0;
    const RealGrid t = t_raw / top;
    panels[0][c] = t;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = cell.find({samples[c], methods[m]});
      if (it == cell.end()) continue;
      const RealGrid x = display_values(it->second, top);
      require_same_shape(x, t, "montage panel");
      panels[1 + m][c] = x;
      panels[1 + methods.size() + m][c] = kErrorGain * (x - t).cwiseAbs();
    }
  }

  const int rows = static_cast<int>(row_labels.size()), cols = static_cast<int>(samples.size());
  GrayImage img;
  img.width = montage_extent(cols, tile);
  img.height = montage_extent(rows, tile);
  img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 0);

  nlohmann::ordered_json side;
  side["modality"] = modality;
  side["tile"] = tile;
  side["gap"] = kMontageGap;
  side["width"] = img.width;
  side["height"] = img.height;
  side["rows"] = row_labels;
  side["columns"] = samples;
  side["panels"] = nlohmann::json::array();
  for (int r = 0; r < rows; ++r) {
    const bool error_row = r > static_cast<int>(methods.size());
    for (int c = 0; c < cols; ++c) {
      const RealGrid& p = panels[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (p.size() == 0) continue;
      double lo = 0.0, hi = 1.0;
      if (!error_row) {
        lo = p.minCoeff();
        hi = p.maxCoeff();
      }
      const int x0 = kMontageGap + c * (tile + kMontageGap);
      const int y0 = kMontageGap + r * (tile + kMontageGap);
      for (int i = 0; i < tile; ++i) {
        for (int j = 0; j < tile; ++j) {
          double v = hi > lo ? (p(i, j) - lo) / (hi - lo) : 0.0;
          v = std::clamp(v, 0.0, 1.0);
          img.pixels[static_cast<std::size_t>(y0 + i) * static_cast<std::size_t>(img.width) +
                     static_cast<std::size_t>(x0 + j)] = static_cast<unsigned char>(std::lround(255.0 * v));
        }
      }
      side["panels"].push_back({{"row", r},
                                {"column", c},
                                {"kind", error_row ? "error" : "image"},
                                {"window", {lo, hi}}});
    }
  }
  write_png(img, png_path);
  return side;
}

}  // namespace

ReportFiles make_report(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw ParameterError("report: no run directories given");
  ReportFiles files;
  files.metrics = collect_metrics(runs);
  files.summary = summarize(files.metrics);
  fs::create_directories(out);
  write_file(out / "metrics.csv", metrics_csv(files.metrics));
  write_file(out / "summary.csv", summary_csv(files.summary));
  files.written = {out / "metrics.csv", out / "summary.csv"};

  const auto found = scan(runs);
  for (const char* modality : {"pet", "mri"}) {
    const bool any = std::any_of(found.begin(), found.end(),
                                 [&](const ResultFile& r) { return r.modality == modality; });
    if (!any) continue;
    const auto png = out / (std::string("montage_") + modality + ".png");
    const auto side = render_montage(found, modality, png);
    const auto json = out / (std::string("montage_") + modality + ".json");
    write_file(json, side.dump(2) + "\n");
    files.written.push_back(png);
    files.written.push_back(json);
  }
  return files;
}

}  // namespace jointrecon
