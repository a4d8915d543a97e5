#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "xsr/drr.hpp"
#include "xsr/network.hpp"
#include "xsr/volume.hpp"

namespace xsr {

inline constexpr const char* kVersion = "0.1.0";

/// Square detector of `size` pixels at the default pitch; shared by the CLI
/// and the HTTP endpoints so both produce the same pixels.
Image render_view(const CtVolume& vol, const OpacityLut& lut, double rx, double ry, int size);

enum class SrMode { lr, bicubic, sr, hr };
std::optional<SrMode> parse_sr_mode(const std::string& s);

/// Image of the requested mode: lr is a size/4 render, bicubic and sr are
/// computed from it (sr clamped to [0,1]), hr is a native render.
Image render_mode(const CtVolume& vol, const OpacityLut& lut, const Weights<float>* model, double rx, double ry,
                  int size, SrMode mode);

struct HttpResponse {
  int status = 200;
  std::string content_type;
  std::string body;
  std::map<std::string, std::string> headers;
};

using QueryParams = std::multimap<std::string, std::string>;

/// Immutable request handler; safe to call from many threads at once.
class ServiceState {
 public:
  ServiceState(CtVolume vol, OpacityLut lut, std::optional<Weights<float>> model);

  HttpResponse info() const;
  HttpResponse render(const QueryParams& q) const;
  HttpResponse render_sr(const QueryParams& q) const;
  HttpResponse spectrum(const QueryParams& q) const;

  const CtVolume& volume() const { return vol_; }
  bool has_model() const { return model_.has_value(); }

 private:
  const CtVolume vol_;
  const OpacityLut lut_;
  const std::optional<Weights<float>> model_;
};

/// HTTP/1.1 front end. Static files under `static_dir` are served from `/`.
class HttpService {
 public:
  HttpService(std::shared_ptr<const ServiceState> state, std::filesystem::path static_dir = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xsr
