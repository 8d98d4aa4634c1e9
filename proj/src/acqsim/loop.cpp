#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "mle/acqsim.hpp"
#include "mle/csv.hpp"
#include "mle/error.hpp"
#include "mle/rng.hpp"

namespace mle::acqsim {

using nlohmann::json;

double Scene::evaluate(double pulse_ms, double p_max_ms) const {
  switch (kind) {
    case SceneKind::linear: return std::clamp(gain * pulse_ms, 0.0, 255.0);
    case SceneKind::gamma: return 255.0 * std::pow(std::clamp(pulse_ms / p_max_ms, 0.0, 1.0), gamma);
    case SceneKind::constant: return level;
  }
  return 0.0;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

const char* scene_name(SceneKind k) {
  switch (k) {
    case SceneKind::linear: return "linear";
    case SceneKind::gamma: return "gamma";
    case SceneKind::constant: return "constant";
  }
  return "linear";
}

struct Frame {
  std::uint32_t id = 0;
  bool preroll = false;
  double pulse_ms = 0.0;
  double intensity = 0.0;
};

std::uint16_t to_us(double ms) { return static_cast<std::uint16_t>(std::lround(std::clamp(ms, 0.0, 14.0) * 1000.0)); }

PulseWidthPacket make_packet(std::uint32_t id, std::size_t slot, double pulse_ms) {
  PulseWidthPacket p;
  p.frame_id = id;
  p.odd_pw[slot] = to_us(pulse_ms);
  p.even_pw[slot] = to_us(pulse_ms);
  return p;
}

bool stalled(const LoopConfig& cfg, int tick) {
  return std::any_of(cfg.stalls.begin(), cfg.stalls.end(),
                     [tick](const Stall& s) { return tick >= s.start && tick < s.start + s.length; });
}

}  // namespace

LoopConfig LoopConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("acqsim config: invalid JSON: ") + e.what());
  }
  check_keys(j, {"frames", "buffer_depth", "processor_latency", "diode_slot", "initial_pulse_ms", "seed", "scene",
                 "exposure", "stalls"},
             "acqsim config");
  LoopConfig c;
  try {
    c.frames = j.value("frames", c.frames);
    c.buffer_depth = j.value("buffer_depth", c.buffer_depth);
    c.processor_latency = j.value("processor_latency", c.processor_latency);
    c.diode_slot = j.value("diode_slot", c.diode_slot);
    c.initial_pulse_ms = j.value("initial_pulse_ms", c.initial_pulse_ms);
    c.seed = j.value("seed", c.seed);
    if (j.contains("scene")) {
      const auto& s = j["scene"];
      check_keys(s, {"kind", "gain", "gamma", "level", "noise_sigma"}, "acqsim scene");
      const std::string kind = s.value("kind", std::string("linear"));
      if (kind == "linear") c.scene.kind = SceneKind::linear;
      else if (kind == "gamma") c.scene.kind = SceneKind::gamma;
      else if (kind == "constant") c.scene.kind = SceneKind::constant;
      else throw ConfigError("acqsim scene: unknown kind '" + kind + "'");
      c.scene.gain = s.value("gain", c.scene.gain);
      c.scene.gamma = s.value("gamma", c.scene.gamma);
      c.scene.level = s.value("level", c.scene.level);
      c.scene.noise_sigma = s.value("noise_sigma", c.scene.noise_sigma);
    }
    if (j.contains("exposure")) {
      const auto& e = j["exposure"];
      check_keys(e, {"i_target", "i_max", "p_max_ms", "p_min_ms"}, "acqsim exposure");
      c.exposure.i_target = e.value("i_target", c.exposure.i_target);
      c.exposure.i_max = e.value("i_max", c.exposure.i_max);
      c.exposure.p_max_ms = e.value("p_max_ms", c.exposure.p_max_ms);
      c.exposure.p_min_ms = e.value("p_min_ms", c.exposure.p_min_ms);
    }
    if (j.contains("stalls")) {
      for (const auto& s : j["stalls"]) c.stalls.push_back({s.at("start").get<int>(), s.at("length").get<int>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("acqsim config: ") + e.what());
  }
  c.validate();
  return c;
}

LoopConfig LoopConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("acqsim config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string LoopConfig::to_json() const {
  json j;
  j["frames"] = frames;
  j["buffer_depth"] = buffer_depth;
  j["processor_latency"] = processor_latency;
  j["diode_slot"] = diode_slot;
  j["initial_pulse_ms"] = initial_pulse_ms;
  j["seed"] = seed;
  j["scene"] = {{"kind", scene_name(scene.kind)},
                {"gain", scene.gain},
                {"gamma", scene.gamma},
                {"level", scene.level},
                {"noise_sigma", scene.noise_sigma}};
  j["exposure"] = {{"i_target", exposure.i_target},
                   {"i_max", exposure.i_max},
                   {"p_max_ms", exposure.p_max_ms},
                   {"p_min_ms", exposure.p_min_ms}};
  j["stalls"] = json::array();
  for (const auto& s : stalls) j["stalls"].push_back({{"start", s.start}, {"length", s.length}});
  return j.dump(2);
}

void LoopConfig::validate() const {
  if (frames <= 0) throw ConfigError("acqsim config: frames must be positive");
  if (buffer_depth <= 0) throw ConfigError("acqsim config: buffer_depth must be positive");
  if (processor_latency < 0) throw ConfigError("acqsim config: processor_latency must be >= 0");
  if (diode_slot >= kDiodeCount) throw ConfigError("acqsim config: diode_slot must be in [0, 8]");
  if (!(exposure.p_min_ms > 0.0) || exposure.p_max_ms > 14.0 || exposure.p_min_ms >= exposure.p_max_ms)
    throw ConfigError("acqsim config: need 0 < p_min_ms < p_max_ms <= 14");
  if (!(exposure.i_target > 0.0 && exposure.i_target < exposure.i_max))
    throw ConfigError("acqsim config: need 0 < i_target < i_max");
  if (!(initial_pulse_ms > 0.0 && initial_pulse_ms <= exposure.p_max_ms))
    throw ConfigError("acqsim config: initial_pulse_ms must be in (0, p_max_ms]");
  if (scene.noise_sigma < 0.0) throw ConfigError("acqsim config: noise_sigma must be >= 0");
  for (const auto& s : stalls)
    if (s.length < 0) throw ConfigError("acqsim config: stall length must be >= 0");
}

LoopResult run_acquisition_loop(const LoopConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  LoopResult res;
  res.log.resize(static_cast<std::size_t>(cfg.frames));

  const auto depth = static_cast<std::size_t>(cfg.buffer_depth);
  BoundedFifo<PulseWidthPacket> packets(2 * depth);
  BoundedFifo<Frame> image_buffers(depth);
  std::deque<Frame> pipeline;
  std::uint32_t next_packet_id = 0;
  for (std::size_t i = 0; i < depth; ++i) packets.push(make_packet(next_packet_id++, cfg.diode_slot, 0.0));
  for (int i = 0; i < cfg.processor_latency; ++i) pipeline.push_back({0, true, 0.0, 0.0});
  PulseWidthPacket last = make_packet(0, cfg.diode_slot, 0.0);

  for (int t = 0; t < cfg.frames; ++t) {
    // controller: one packet per field sync
    if (auto p = packets.pop()) {
      last = *p;
    } else {
      ++res.underruns;
    }
    Frame f;
    f.id = static_cast<std::uint32_t>(t);
    f.pulse_ms = last.odd_pw[cfg.diode_slot] / 1000.0;
    double intensity = cfg.scene.evaluate(f.pulse_ms, cfg.exposure.p_max_ms);
    if (cfg.scene.noise_sigma > 0.0) intensity += cfg.scene.noise_sigma * rng.normal();
    f.intensity = std::clamp(intensity, 0.0, cfg.exposure.i_max);
    res.log[static_cast<std::size_t>(t)] = {f.id, cfg.diode_slot, last.odd_pw[cfg.diode_slot], f.intensity, false};
    pipeline.push_back(f);

    // video processor + capture card
    if (static_cast<int>(pipeline.size()) > cfg.processor_latency) {
      Frame out = pipeline.front();
      pipeline.pop_front();
      if (!image_buffers.push(out)) {
        ++res.dropped;
        if (!out.preroll) res.log[out.id].dropped = true;
      }
    }

    // host frame processing thread
    if (stalled(cfg, t)) continue;
    auto frame = image_buffers.pop();
    if (!frame) continue;
    if (!frame->preroll) res.processed.push_back(frame->id);
    double next = cfg.initial_pulse_ms;
    if (!frame->preroll && frame->pulse_ms > 0.0) {
      const auto u = auto_exposure_update(frame->intensity, std::min(frame->pulse_ms, cfg.exposure.p_max_ms), cfg.exposure);
      res.diverged_updates += u.diverged ? 1 : 0;
      next = u.pulse_ms;
    }
    packets.push(make_packet(next_packet_id++, cfg.diode_slot, next));
  }
  return res;
}

std::string log_csv(const LoopResult& r) {
  std::string out = "frame_id,diode,pulse_us,mean_intensity,dropped\n";
  for (const auto& row : r.log) {
    out += std::to_string(row.frame_id) + ',' + std::to_string(row.diode) + ',' + std::to_string(row.pulse_us) + ',' +
           format_number(row.mean_intensity) + ',' + (row.dropped ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<double> simulate_sync_stream(const LoopConfig& cfg, int frames) {
  cfg.validate();
  require(frames > 0, "simulate_sync_stream: frames must be positive");
  const auto depth = static_cast<std::size_t>(cfg.buffer_depth);
  BoundedFifo<PulseWidthPacket> packets(2 * depth);
  std::deque<Frame> pipeline;
  for (std::size_t i = 0; i < depth; ++i) packets.push(make_packet(0, cfg.diode_slot, 0.0));
  for (int i = 0; i < cfg.processor_latency; ++i) pipeline.push_back({0, true, 0.0, cfg.scene.evaluate(0.0, 14.0)});
  std::vector<double> means;
  PulseWidthPacket last = make_packet(0, cfg.diode_slot, 0.0);
  for (int t = 0; t < frames + cfg.processor_latency + cfg.buffer_depth && static_cast<int>(means.size()) < frames;
       ++t) {
    if (auto p = packets.pop()) last = *p;
    const double pulse = last.odd_pw[cfg.diode_slot] / 1000.0;
    pipeline.push_back({static_cast<std::uint32_t>(t), false, pulse, cfg.scene.evaluate(pulse, cfg.exposure.p_max_ms)});
    if (static_cast<int>(pipeline.size()) > cfg.processor_latency) {
      means.push_back(pipeline.front().intensity);
      pipeline.pop_front();
    }
    // the synchronization pulse is the first packet the host queues
    packets.push(make_packet(static_cast<std::uint32_t>(t + 1), cfg.diode_slot, t == 0 ? cfg.exposure.p_max_ms : 0.0));
  }
  return means;
}

}  // namespace mle::acqsim
