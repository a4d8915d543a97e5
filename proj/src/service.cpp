#include "xsr/service.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "xsr/bicubic.hpp"
#include "xsr/error.hpp"
#include "xsr/spectrum.hpp"
#include "xsr/train.hpp"

namespace xsr {

Image render_view(const CtVolume& vol, const OpacityLut& lut, double rx, double ry, int size) {
  ViewPose p;
  p.theta_x = rx;
  p.theta_y = ry;
  p.det_w = p.det_h = size;
  return render(vol, lut, p);
}

std::optional<SrMode> parse_sr_mode(const std::string& s) {
  if (s == "lr") return SrMode::lr;
  if (s == "bicubic") return SrMode::bicubic;
  if (s == "sr") return SrMode::sr;
  if (s == "hr") return SrMode::hr;
  return std::nullopt;
}

Image render_mode(const CtVolume& vol, const OpacityLut& lut, const Weights<float>* model, double rx, double ry,
                  int size, SrMode mode) {
  require(size % 4 == 0, "render_mode: size must be divisible by 4");
  if (mode == SrMode::hr) return render_view(vol, lut, rx, ry, size);
  const Image lr = render_view(vol, lut, rx, ry, size / 4);
  switch (mode) {
    case SrMode::lr:
      return lr;
    case SrMode::bicubic:
      return bicubic_resample(lr, size, size);
    case SrMode::sr:
      require(model != nullptr, "render_mode: no model loaded");
      return super_resolve(*model, lr, 4);
    default:
      return lr;
  }
}

// ---------------------------------------------------------------- handlers

namespace {

struct BadRequest {
  int status;
  std::string message;
};

HttpResponse error_response(int status, const std::string& message) {
  HttpResponse r;
  r.status = status;
  r.content_type = "application/json";
  r.body = nlohmann::json{{"error", message}}.dump();
  return r;
}

HttpResponse png_response(const Image& img, double ms) {
  HttpResponse r;
  r.content_type = "image/png";
  const std::vector<unsigned char> png = encode_png8(img);
  r.body.assign(png.begin(), png.end());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  r.headers["X-Render-Ms"] = buf;
  r.headers["Cache-Control"] = "no-store";
  return r;
}

const std::string* param(const QueryParams& q, const std::string& key) {
  const auto it = q.find(key);
  return it == q.end() ? nullptr : &it->second;
}

double angle_param(const QueryParams& q, const std::string& key) {
  const std::string* s = param(q, key);
  if (!s) return 0.0;
  char* end = nullptr;
  const double v = std::strtod(s->c_str(), &end);
  if (s->empty() || *end != '\0' || !std::isfinite(v)) throw BadRequest{400, key + " must be a finite number"};
  return v;
}

int size_param(const QueryParams& q) {
  const std::string* s = param(q, "size");
  if (!s) return 512;
  char* end = nullptr;
  const long v = std::strtol(s->c_str(), &end, 10);
  if (s->empty() || *end != '\0' || v < 64 || v > 1024) throw BadRequest{400, "size must be an integer in [64, 1024]"};
  return static_cast<int>(v);
}

SrMode mode_param(const QueryParams& q) {
  const std::string* s = param(q, "mode");
  if (!s) throw BadRequest{400, "mode is required (lr, bicubic, sr, hr)"};
  const auto m = parse_sr_mode(*s);
  if (!m) throw BadRequest{400, "unknown mode '" + *s + "'"};
  return *m;
}

template <class F>
HttpResponse guarded(F&& f) {
  try {
    return f();
  } catch (const BadRequest& e) {
    return error_response(e.status, e.message);
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ServiceState::ServiceState(CtVolume vol, OpacityLut lut, std::optional<Weights<float>> model)
    : vol_(std::move(vol)), lut_(std::move(lut)), model_(std::move(model)) {
  lut_.validate();
}

HttpResponse ServiceState::info() const {
  nlohmann::json j;
  j["dims"] = vol_.dims();
  j["spacing"] = vol_.spacing();
  j["model"] = model_ ? "loaded" : "none";
  j["version"] = kVersion;
  j["modes"] = model_ ? std::vector<std::string>{"lr", "bicubic", "sr", "hr"}
                      : std::vector<std::string>{"lr", "bicubic", "hr"};
  HttpResponse r;
  r.content_type = "application/json";
  r.body = j.dump();
  return r;
}

HttpResponse ServiceState::render(const QueryParams& q) const {
  return guarded([&] {
    const double rx = angle_param(q, "rx"), ry = angle_param(q, "ry");
    const int size = size_param(q);
    const auto t0 = std::chrono::steady_clock::now();
    const Image img = render_view(vol_, lut_, rx, ry, size);
    return png_response(img, ms_since(t0));
  });
}

namespace {

struct ModeRequest {
  double rx, ry;
  int size;
  SrMode mode;
};

ModeRequest mode_request(const QueryParams& q, bool has_model) {
  ModeRequest m{angle_param(q, "rx"), angle_param(q, "ry"), size_param(q), mode_param(q)};
  if (m.size % 4 != 0) throw BadRequest{400, "size must be divisible by 4"};
  if (m.mode == SrMode::sr && !has_model) throw BadRequest{409, "mode=sr requires a loaded model"};
  return m;
}

}  // namespace

HttpResponse ServiceState::render_sr(const QueryParams& q) const {
  return guarded([&] {
    const ModeRequest m = mode_request(q, has_model());
    const auto t0 = std::chrono::steady_clock::now();
    const Image img = render_mode(vol_, lut_, model_ ? &*model_ : nullptr, m.rx, m.ry, m.size, m.mode);
    return png_response(img, ms_since(t0));
  });
}

HttpResponse ServiceState::spectrum(const QueryParams& q) const {
  return guarded([&] {
    const ModeRequest m = mode_request(q, has_model());
    const auto t0 = std::chrono::steady_clock::now();
    const Image img = render_mode(vol_, lut_, model_ ? &*model_ : nullptr, m.rx, m.ry, m.size, m.mode);
    return png_response(log_magnitude(img), ms_since(t0));
  });
}

// ---------------------------------------------------------------- HTTP

struct HttpService::Impl {
  std::shared_ptr<const ServiceState> state;
  httplib::Server server;
};

namespace {

constexpr const char* kPlaceholder =
    "<!doctype html><html><head><title>xsr</title></head><body>"
    "<p>xsr service is running. Start with --static DIR to serve the viewer.</p>"
    "<p>Endpoints: /api/info, /api/render, /api/render_sr, /api/spectrum</p>"
    "</body></html>";

void send(const HttpResponse& r, httplib::Response& res) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpService::HttpService(std::shared_ptr<const ServiceState> state, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  auto& srv = impl_->server;
  const ServiceState* st = impl_->state.get();
  srv.Get("/api/info", [st](const httplib::Request&, httplib::Response& res) { send(st->info(), res); });
  srv.Get("/api/render", [st](const httplib::Request& req, httplib::Response& res) { send(st->render(req.params), res); });
  srv.Get("/api/render_sr",
          [st](const httplib::Request& req, httplib::Response& res) { send(st->render_sr(req.params), res); });
  srv.Get("/api/spectrum",
          [st](const httplib::Request& req, httplib::Response& res) { send(st->spectrum(req.params), res); });
  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir.string()))
      throw DataError("static directory not found: " + static_dir.string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholder, "text/html"); });
  }
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::run() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace xsr
