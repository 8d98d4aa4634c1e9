#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "mle/acqsim.hpp"
#include "mle/colorsim.hpp"
#include "mle/csv.hpp"
#include "mle/cube_io.hpp"
#include "mle/error.hpp"
#include "mle/image_io.hpp"
#include "mle/lsci.hpp"
#include "mle/parallel.hpp"
#include "mle/pse.hpp"
#include "mle/spectral.hpp"
#include "mle/statkit.hpp"
#include "mle/synthlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mle;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  std::string format = "text";
  std::string config;
};

json load_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  std::ifstream in(g.config);
  if (!in) throw ConfigError("cannot open config " + g.config);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

// Writes a summary as key/value lines or as one JSON object.
void report(const Globals& g, const json& summary) {
  if (g.format == "json") {
    std::cout << summary.dump(2) << '\n';
    return;
  }
  for (const auto& [k, v] : summary.items()) std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

imgcore::Field read_image(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return io::read_png(p);
  if (ext == ".pgm") return io::read_pgm(p);
  if (ext == ".mle") return io::field_from_cube(io::read_cube(p));
  throw ValidationError("unsupported image format: " + p.string());
}

imgcore::Roi parse_roi(const std::string& s) {
  imgcore::Roi r;
  char c1, c2, c3;
  std::istringstream in(s);
  if (!(in >> r.x >> c1 >> r.y >> c2 >> r.width >> c3 >> r.height) || c1 != ',' || c2 != ',' || c3 != ',')
    throw ValidationError("ROI must be x,y,width,height: " + s);
  if (r.width <= 0 || r.height <= 0) throw ValidationError("ROI must have positive size");
  return r;
}

std::vector<std::uint8_t> roi_mask(const imgcore::Roi& r, int w, int h) {
  if (r.x < 0 || r.y < 0 || r.x + r.width > w || r.y + r.height > h) throw ValidationError("ROI exceeds image bounds");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h, 0);
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x) m[static_cast<std::size_t>(y) * w + x] = 1;
  return m;
}

imgcore::Field plane(const std::vector<double>& v, const std::vector<std::uint8_t>& mask, int w, int h) {
  imgcore::Field f(w, h, 1);
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    f.data()[i] = v[i];
    f.mask()[i] = mask.empty() ? 1 : mask[i];
  }
  return f;
}

double masked_mae(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// ---- preprocess ----------------------------------------------------------

struct PreprocessArgs {
  std::string frame;
  std::string dark;
  double smooth_sigma = 0.0;
};

void run_preprocess(const Globals& g, const PreprocessArgs& a) {
  imgcore::Field frame = read_image(a.frame);
  if (!a.dark.empty()) frame = imgcore::subtract_dark(frame, read_image(a.dark));
  auto [odd, even] = imgcore::deinterlace(frame);
  if (a.smooth_sigma > 0.0) {
    odd = imgcore::gaussian_smooth(odd, 5, a.smooth_sigma);
    even = imgcore::gaussian_smooth(even, 5, a.smooth_sigma);
  }
  io::write_cube(out_path(g, "odd.mle"), io::to_cube(odd));
  io::write_cube(out_path(g, "even.mle"), io::to_cube(even));
  io::write_png16(out_path(g, "odd.png"), odd);
  io::write_png16(out_path(g, "even.png"), even);
  report(g, {{"command", "preprocess"}, {"width", frame.width()}, {"height", frame.height()}, {"channels", frame.channels()}});
}

// ---- sto2 ----------------------------------------------------------------

struct Sto2Args {
  std::string cube;
  std::string extinction;
  std::string roi;
  std::string truth;
  bool rescale = false;
};

void run_sto2(const Globals& g, const Sto2Args& a) {
  auto cube = io::spectral_from_cube(io::read_cube(a.cube));
  if (a.rescale) cube = spectral::cube_rescale(cube);
  const auto table = a.extinction.empty() ? spectral::ExtinctionTable::bundled()
                                          : spectral::ExtinctionTable::load_csv(a.extinction);
  const auto maps = spectral::unmix(spectral::absorbance(cube), table);
  const auto f = maps.sto2_field();
  io::write_cube(out_path(g, "sto2.mle"), io::to_cube(f));
  std::vector<imgcore::Field> chrom = {plane(maps.chbo2_l, maps.mask, maps.width, maps.height),
                                       plane(maps.chb_l, maps.mask, maps.width, maps.height),
                                       plane(maps.offset, maps.mask, maps.width, maps.height)};
  auto cc = io::to_cube(std::span<const imgcore::Field>(chrom));
  cc.metadata = {{"kind", "sequence"}, {"planes", {"chbo2_l", "chb_l", "offset"}}};
  io::write_cube(out_path(g, "chromophores.mle"), cc);
  io::write_png8(out_path(g, "sto2.png"), io::false_color(f, 0.0, 1.0));
  json s = {{"command", "sto2"}, {"valid_pixels", f.valid_count()}};
  if (!a.roi.empty()) {
    const auto st = spectral::sto2_timeseries(std::span<const spectral::ChromophoreMaps>(&maps, 1), parse_roi(a.roi));
    s["roi_mean"] = st[0].mean;
    s["roi_std"] = st[0].stddev;
    s["roi_count"] = st[0].count;
  }
  if (!a.truth.empty()) {
    const auto t = io::field_from_cube(io::read_cube(a.truth));
    require(t.pixel_count() == f.pixel_count(), "sto2: truth size mismatch");
    double err = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < f.pixel_count(); ++i)
      if (f.mask()[i]) err += std::abs(f.data()[i] - t.data()[i]), ++n;
    s["mae_vs_truth"] = n ? err / static_cast<double>(n) : 0.0;
  }
  report(g, s);
}

// ---- lsci ----------------------------------------------------------------

struct LsciArgs {
  std::string frames;
  std::string color;
  int window = 15;
  int median = 0;
};

void run_lsci(const Globals& g, const LsciArgs& a) {
  const auto frames = io::frames_from_cube(io::read_cube(a.frames));
  require(!frames.empty(), "lsci: no frames");
  std::vector<lsci::FlowMap> flows;
  std::vector<imgcore::Field> contrast;
  for (const auto& f : frames) {
    const auto k = lsci::speckle_contrast(f);
    contrast.push_back(k.to_field());
    flows.push_back(lsci::flow_from_contrast(k));
  }
  io::write_cube(out_path(g, "contrast.mle"), io::to_cube(std::span<const imgcore::Field>(contrast)));
  lsci::FlowMap result = flows[frames.size() / 2];
  int dropped = 0;
  if (!a.color.empty()) {
    auto color = io::frames_from_cube(io::read_cube(a.color));
    if (color.size() != flows.size()) throw ValidationError("lsci: colour and speckle frame counts differ");
    const int win = std::min<int>(a.window, static_cast<int>(flows.size()));
    const int start = static_cast<int>(flows.size()) / 2 - win / 2;
    const auto avg = lsci::temporal_average(std::span<const lsci::FlowMap>(flows).subspan(start, win),
                                            std::span<const imgcore::Field>(color).subspan(start, win));
    result = avg.map;
    dropped = avg.dropped;
  }
  const auto field = result.to_field();
  io::write_cube(out_path(g, "flow.mle"), io::to_cube(field));
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < field.pixel_count(); ++i)
    if (field.mask()[i]) lo = std::min(lo, field.data()[i]), hi = std::max(hi, field.data()[i]);
  const auto display = a.median > 1 ? imgcore::median_filter(field, a.median) : field;
  io::write_png8(out_path(g, "flow.png"), io::false_color(display, lo, hi));
  report(g, {{"command", "lsci"}, {"frames", frames.size()}, {"frames_averaged", result.frames_averaged},
             {"dropped", dropped}});
}

// ---- pse -----------------------------------------------------------------

struct PseArgs {
  std::string in;
  std::string rig;
  std::string truth;
  double highpass = 150.0;
  std::string method = "dct";
  bool inpaint = true;
};

void run_pse(const Globals& g, const PseArgs& a) {
  const fs::path dir(a.in);
  const auto rig = a.rig.empty() ? (fs::exists(dir / "rig.json") ? pse::LightRig::load_json(dir / "rig.json")
                                                                : pse::LightRig::default_rig())
                                 : pse::LightRig::load_json(a.rig);
  std::vector<imgcore::Field> images;
  if (fs::exists(dir / "images.mle")) {
    images = io::frames_from_cube(io::read_cube(dir / "images.mle"));
  } else {
    for (std::size_t l = 0; l < rig.size(); ++l) images.push_back(read_image(dir / ("image_" + std::to_string(l) + ".png")));
  }
  if (a.inpaint) images = pse::inpaint_speculars(images).images;
  auto sf = pse::solve_normals(images, rig);
  if (a.highpass > 0.0) sf = pse::highpass_normals(sf, a.highpass);
  if (a.method != "dct" && a.method != "multigrid") throw ValidationError("pse: method must be dct or multigrid");
  sf.height_map = pse::integrate_normals(sf, a.method == "dct" ? pse::PoissonMethod::dct : pse::PoissonMethod::multigrid);
  const int w = sf.width, h = sf.height;
  io::write_cube(out_path(g, "height.mle"), io::to_cube(plane(sf.height_map, {}, w, h)));
  io::write_cube(out_path(g, "albedo.mle"), io::to_cube(plane(sf.albedo, sf.mask, w, h)));
  imgcore::Field normals(w, h, 3);
  for (std::size_t i = 0; i < sf.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) normals.data()[i * 3 + static_cast<std::size_t>(c)] = io::normal_component_to_byte(sf.normal[i][c]) / 255.0;
  io::write_png8(out_path(g, "normals.png"), normals);
  std::vector<double> disp(sf.height_map);
  for (double& v : disp) v = 0.5 * (v + 1.0);
  io::write_png16(out_path(g, "height.png"), plane(disp, {}, w, h));
  io::write_png8(out_path(g, "relit.png"), pse::render_relit(sf.height_map, w, h, Eigen::Vector3d(1.0, -1.0, 1.0)));
  json s = {{"command", "pse"}, {"width", w}, {"height", h}, {"lights", rig.size()}};
  const fs::path truth = a.truth.empty() ? dir / "truth.mle" : fs::path(a.truth);
  if (fs::exists(truth)) {
    const auto planes = io::frames_from_cube(io::read_cube(truth));
    require(!planes.empty() && planes[0].pixel_count() == sf.pixel_count(), "pse: truth size mismatch");
    const auto& ref = planes.size() > 1 && a.highpass > 0.0 ? planes[1] : planes[0];
    s["height_mae"] = masked_mae(sf.height_map, std::vector<double>(ref.data().begin(), ref.data().end()));
  }
  report(g, s);
}

// ---- render / optimize-se ------------------------------------------------

struct RenderArgs {
  std::string mode;
  std::string cube;
  std::string response;
  std::string weights;
  std::string display = "mean";
};

Eigen::MatrixXd read_weights(const fs::path& p, std::size_t bands) {
  const auto t = read_csv(p);
  if (t.rows.size() != bands) throw ValidationError("weights: one row per wavelength is required");
  Eigen::MatrixXd w(3, static_cast<Eigen::Index>(bands));
  for (std::size_t i = 0; i < bands; ++i) {
    w(0, static_cast<Eigen::Index>(i)) = t.number(i, "w_r");
    w(1, static_cast<Eigen::Index>(i)) = t.number(i, "w_g");
    w(2, static_cast<Eigen::Index>(i)) = t.number(i, "w_b");
  }
  return w;
}

void write_weights(const fs::path& p, const Eigen::MatrixXd& w, const std::vector<double>& wl) {
  CsvTable t;
  t.header = {"wavelength_nm", "w_r", "w_g", "w_b"};
  for (Eigen::Index i = 0; i < w.cols(); ++i)
    t.rows.push_back({format_number(wl[static_cast<std::size_t>(i)]), format_number(w(0, i)), format_number(w(1, i)),
                      format_number(w(2, i))});
  write_csv(p, t);
}

void run_render(const Globals& g, const RenderArgs& a) {
  const auto cube = io::spectral_from_cube(io::read_cube(a.cube));
  imgcore::Field rgb;
  if (a.mode == "wle") {
    rgb = colorsim::render_color(cube, a.response.empty() ? colorsim::SpectralResponse::bundled()
                                                          : colorsim::SpectralResponse::load_csv(a.response));
  } else if (a.mode == "nbi") {
    rgb = colorsim::render_nbi(cube, a.response.empty() ? colorsim::SpectralResponse::bundled_nbi()
                                                        : colorsim::SpectralResponse::load_csv(a.response));
  } else if (a.mode == "se") {
    if (a.weights.empty()) throw ValidationError("render se: --weights is required");
    rgb = colorsim::render_weighted(cube, read_weights(a.weights, cube.bands()));
  } else {
    throw ValidationError("render: mode must be wle, nbi or se");
  }
  const auto mode = a.display == "pixel" ? colorsim::DisplayMode::pixel_max : colorsim::DisplayMode::image_mean;
  if (a.display != "pixel" && a.display != "mean") throw ValidationError("render: display must be pixel or mean");
  const auto shown = colorsim::normalize_display(rgb, mode, mode == colorsim::DisplayMode::pixel_max ? 0.8 : 0.4);
  io::write_cube(out_path(g, a.mode + ".mle"), io::to_cube(rgb));
  io::write_png8(out_path(g, a.mode + ".png"), shown.image);
  report(g, {{"command", "render"}, {"mode", a.mode}, {"width", rgb.width()}, {"height", rgb.height()}});
}

struct OptimizeArgs {
  std::string cube;
  std::string normal_roi;
  std::string lesion_roi;
  std::string init;
  int samples = 100;
  colorsim::SeOptions opts;
};

void run_optimize(const Globals& g, const OptimizeArgs& a) {
  const auto cube = io::spectral_from_cube(io::read_cube(a.cube));
  Rng rng(g.seed);
  const auto samples = colorsim::sample_pixels(cube, roi_mask(parse_roi(a.normal_roi), cube.width, cube.height),
                                               roi_mask(parse_roi(a.lesion_roi), cube.width, cube.height),
                                               static_cast<std::size_t>(a.samples), rng);
  const auto wle = colorsim::SpectralResponse::bundled();
  Eigen::MatrixXd init;
  if (a.init.empty()) {
    init.resize(3, static_cast<Eigen::Index>(cube.bands()));
    for (int c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < cube.bands(); ++k) init(c, static_cast<Eigen::Index>(k)) = wle.bayer[c][k];
  } else {
    init = read_weights(a.init, cube.bands());
  }
  const auto res = colorsim::optimize_se(samples, init, a.opts);
  write_weights(out_path(g, "se_weights.csv"), res.weights, cube.wavelengths_nm);
  CsvTable trace;
  trace.header = {"iteration", "delta_e00"};
  for (std::size_t i = 0; i < res.trace.size(); ++i) trace.rows.push_back({std::to_string(i), format_number(res.trace[i])});
  write_csv(out_path(g, "se_trace.csv"), trace);
  const double wle_de = colorsim::separation(wle.weights(), samples);
  json s = {{"command", "optimize-se"}, {"initial", res.trace.front()}, {"final", res.trace.back()},
            {"iterations", res.trace.size() - 1}, {"wle_delta_e00", wle_de}};
  if (res.aborted) {
    s["aborted"] = res.message;
    report(g, s);
    throw std::runtime_error("optimize-se: " + res.message);
  }
  report(g, s);
}

// ---- acqsim ----------------------------------------------------------------

struct AcqArgs {
  int frames = 0;
  std::string scene;
};

void run_acqsim(const Globals& g, const AcqArgs& a) {
  acqsim::LoopConfig cfg = g.config.empty() ? acqsim::LoopConfig{} : acqsim::LoopConfig::load(g.config);
  if (a.frames > 0) cfg.frames = a.frames;
  if (!a.scene.empty()) {
    if (a.scene == "linear") cfg.scene.kind = acqsim::SceneKind::linear;
    else if (a.scene == "gamma") cfg.scene.kind = acqsim::SceneKind::gamma;
    else if (a.scene == "constant") cfg.scene.kind = acqsim::SceneKind::constant;
    else throw ValidationError("acqsim: scene must be linear, gamma or constant");
  }
  if (g.config.empty() || !load_config(g).contains("seed")) cfg.seed = g.seed;
  cfg.validate();
  const auto res = acqsim::run_acquisition_loop(cfg);
  write_text(out_path(g, "acq_log.csv"), acqsim::log_csv(res));
  const auto means = acqsim::simulate_sync_stream(cfg, 4 * (cfg.buffer_depth + cfg.processor_latency) + 8);
  const int delay = acqsim::measure_sync_delay(means);
  acqsim::PulseWidthPacket pkt;
  pkt.frame_id = 1;
  pkt.odd_pw[cfg.diode_slot] = res.log.back().pulse_us;
  pkt.even_pw[cfg.diode_slot] = res.log.back().pulse_us;
  write_text(out_path(g, "last_packet.hex"), acqsim::hex_dump(acqsim::encode_pulse_packet(pkt)));
  write_text(out_path(g, "acq_config.json"), cfg.to_json() + "\n");
  report(g, {{"command", "acqsim"}, {"frames", cfg.frames}, {"dropped", res.dropped}, {"underruns", res.underruns},
             {"sync_delay", delay}, {"final_pulse_us", res.log.back().pulse_us},
             {"final_intensity", res.log.back().mean_intensity}});
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string kind;
  std::string params;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  json spec = load_config(g);
  if (!a.kind.empty()) spec["kind"] = a.kind;
  if (!spec.contains("seed")) spec["seed"] = g.seed;
  if (!a.params.empty()) {
    try {
      spec["params"] = json::parse(a.params);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("synth: --params is not valid JSON: ") + e.what());
    }
  }
  const auto ps = synthlab::PhantomSpec::from_json(spec);
  fs::create_directories(g.out_dir);
  const auto files = synthlab::write_phantom(ps, g.out_dir);
  report(g, {{"command", "synth"}, {"kind", synthlab::kind_name(ps.kind)}, {"files", files}});
}

// ---- stats -------------------------------------------------------------------

struct StatsArgs {
  std::string table;
  std::string family;
  std::string baseline;
  std::vector<std::string> comparisons;
  std::string ancova;
  int resamples = 10000;
};

void run_stats(const Globals& g, const StatsArgs& a) {
  if (!a.ancova.empty()) {
    const auto t = read_csv(a.ancova);
    std::vector<double> y, v;
    std::vector<std::string> grp;
    const std::size_t gc = t.column("exposure");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      y.push_back(t.number(i, "contrast"));
      v.push_back(t.number(i, "velocity"));
      grp.push_back(t.rows[i][gc]);
    }
    const auto r = statkit::ancova_interaction(y, v, grp);
    CsvTable out;
    out.header = {"term", "f", "df_num", "df_den", "p", "r2"};
    out.rows.push_back({"velocity:exposure", format_number(r.f), std::to_string(r.df_num), std::to_string(r.df_den),
                        format_number(r.p), format_number(r.r2)});
    write_csv(out_path(g, "ancova.csv"), out);
    report(g, {{"command", "stats"}, {"f", r.f}, {"df_num", r.df_num}, {"df_den", r.df_den}, {"p", r.p}});
    return;
  }
  if (a.table.empty()) throw ValidationError("stats: --table or --ancova is required");
  const auto t = read_csv(a.table);
  std::string baseline = a.baseline;
  std::vector<std::string> skip;
  if (a.family == "wle_hue") baseline = "WLE Hue", skip = {"WLE Sat."};
  else if (a.family == "wle_sat") baseline = "WLE Sat.", skip = {"WLE Hue"};
  else if (!a.family.empty()) throw ValidationError("stats: family must be wle_hue or wle_sat");
  if (baseline.empty()) throw ValidationError("stats: --family or --baseline is required");
  std::vector<std::string> comps = a.comparisons;
  if (comps.empty())
    for (const auto& grp : statkit::groups_in_order(t))
      if (grp != baseline && std::find(skip.begin(), skip.end(), grp) == skip.end()) comps.push_back(grp);
  statkit::PairedOptions opts;
  opts.seed = g.seed;
  opts.resamples = a.resamples;
  const auto rows = statkit::compare_family(t, baseline, comps, opts);
  write_csv(out_path(g, "stats.csv"), statkit::comparison_table(rows));
  report(g, {{"command", "stats"}, {"baseline", baseline}, {"comparisons", rows.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-contrast laser endoscopy processing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--format", g.format, "Summary format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--config", g.config, "JSON configuration file");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Dark subtraction and deinterlacing");
  c_pre->add_option("--frame", pre.frame, "Full frame (png, pgm or mle)")->required();
  c_pre->add_option("--dark", pre.dark, "Dark frame");
  c_pre->add_option("--smooth", pre.smooth_sigma, "Gaussian smoothing sigma (5x5 kernel)");

  Sto2Args so;
  auto* c_sto2 = app.add_subcommand("sto2", "Oxygen saturation from a reflectance cube");
  c_sto2->add_option("--cube", so.cube, "Spectral reflectance cube")->required();
  c_sto2->add_option("--extinction", so.extinction, "Extinction table CSV");
  c_sto2->add_option("--roi", so.roi, "ROI x,y,width,height for summary statistics");
  c_sto2->add_option("--truth", so.truth, "Ground-truth saturation map");
  c_sto2->add_flag("--rescale", so.rescale, "Rescale the cube by its maximum before unmixing");

  LsciArgs ls;
  auto* c_lsci = app.add_subcommand("lsci", "Speckle contrast and flow maps");
  c_lsci->add_option("--frames", ls.frames, "Speckle frame sequence cube")->required();
  c_lsci->add_option("--color", ls.color, "White-light frames for registered averaging");
  c_lsci->add_option("--window", ls.window, "Temporal window")->check(CLI::PositiveNumber);
  c_lsci->add_option("--median", ls.median, "Display-only median filter size");

  PseArgs ps;
  auto* c_pse = app.add_subcommand("pse", "Photometric stereo height reconstruction");
  c_pse->add_option("--in", ps.in, "Directory with images.mle or image_<n>.png")->required();
  c_pse->add_option("--rig", ps.rig, "Light rig JSON");
  c_pse->add_option("--truth", ps.truth, "Truth cube (defaults to <in>/truth.mle when present)");
  c_pse->add_option("--highpass", ps.highpass, "High-pass sigma, 0 disables");
  c_pse->add_option("--method", ps.method, "Poisson solver: dct or multigrid");
  c_pse->add_flag("!--no-inpaint", ps.inpaint, "Skip specular inpainting");

  RenderArgs rd;
  auto* c_render = app.add_subcommand("render", "Simulated colour rendering");
  c_render->add_option("mode", rd.mode, "wle, nbi or se")->required()->check(CLI::IsMember({"wle", "nbi", "se"}));
  c_render->add_option("--cube", rd.cube, "Spectral reflectance cube")->required();
  c_render->add_option("--response", rd.response, "Response CSV");
  c_render->add_option("--weights", rd.weights, "SE weights CSV");
  c_render->add_option("--display", rd.display, "pixel (max 0.8) or mean (0.4)");

  OptimizeArgs op;
  auto* c_opt = app.add_subcommand("optimize-se", "Optimize spectral-enhancement camera weights");
  c_opt->add_option("--cube", op.cube, "Spectral reflectance cube")->required();
  c_opt->add_option("--normal-roi", op.normal_roi, "x,y,width,height")->required();
  c_opt->add_option("--lesion-roi", op.lesion_roi, "x,y,width,height")->required();
  c_opt->add_option("--init", op.init, "Initial weights CSV (default: camera Bayer curves)");
  c_opt->add_option("--samples", op.samples, "Pixels per class")->check(CLI::PositiveNumber);
  c_opt->add_option("--iters", op.opts.iterations, "Iterations");
  c_opt->add_option("--lr", op.opts.learning_rate, "Initial step");

  AcqArgs aq;
  auto* c_acq = app.add_subcommand("acqsim", "Acquisition loop simulation");
  c_acq->add_option("--frames", aq.frames, "Frames to simulate");
  c_acq->add_option("--scene", aq.scene, "linear, gamma or constant");

  SynthArgs sy;
  auto* c_syn = app.add_subcommand("synth", "Synthetic phantoms");
  c_syn->add_option("--kind", sy.kind, "speckle_flow, lambertian_surface, spectral_scene or macbeth");
  c_syn->add_option("--params", sy.params, "Generator parameters as JSON");

  StatsArgs st;
  auto* c_stats = app.add_subcommand("stats", "Paired comparisons and ANCOVA");
  c_stats->add_option("--table", st.table, "CSV sample_id,group,value");
  c_stats->add_option("--family", st.family, "wle_hue or wle_sat");
  c_stats->add_option("--baseline", st.baseline, "Baseline group");
  c_stats->add_option("--comparisons", st.comparisons, "Comparison groups")->delimiter(',');
  c_stats->add_option("--ancova", st.ancova, "CSV contrast,velocity,exposure");
  c_stats->add_option("--resamples", st.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_thread_count(g.threads);
    if (*c_pre) run_preprocess(g, pre);
    else if (*c_sto2) run_sto2(g, so);
    else if (*c_lsci) run_lsci(g, ls);
    else if (*c_pse) run_pse(g, ps);
    else if (*c_render) run_render(g, rd);
    else if (*c_opt) run_optimize(g, op);
    else if (*c_acq) run_acqsim(g, aq);
    else if (*c_syn) run_synth(g, sy);
    else if (*c_stats) run_stats(g, st);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
