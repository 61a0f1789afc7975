// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "lcpred/common.hpp"
#include "lcpred/io/files.hpp"
#include "lcpred/srm.hpp"
#include "lcpred/stopping.hpp"

namespace lcpred::io {

// Advisor protocol: one JSON object per line in each direction.
//
//   -> {"kind":"register","session":"a","config":{"ap":{...},"hp":{...}}}
//   <- {"kind":"ack","session":"a"}
//   -> {"kind":"epoch_report","session":"a","epoch":1,"value":0.31}
//   <- {"kind":"decision","session":"a","epoch":1,"action":"continue",
//       "probability":0.0,"reference":null,"predicted":null,"sigma":null}
//   -> {"kind":"finalize","session":"a","value":0.87}
//   <- {"kind":"ack","session":"a"}
//
// Errors reply {"kind":"error","code":"malformed"|"protocol","message":...}
// and leave every session as it was. Epochs start at 1 and must be
// contiguous. A terminate decision records the predicted final value in the
// best ledger and closes the session. Values are in the model's raw
// orientation on the wire.

inline constexpr const char* kLedgerFormat = "lcpred.best_ledger";

class AdvisorService {
 public:
  AdvisorService(SequentialRegressionModel model, TerminationPolicy policy,
                 std::optional<std::filesystem::path> ledger_path = std::nullopt)
      : model_(std::move(model)), policy_(policy), ledger_path_(std::move(ledger_path)) {
    policy_.validate();
    if (ledger_path_ && std::filesystem::exists(*ledger_path_)) load_ledger();
  }

  /// Handles one request line and returns the reply line (no newline).
  std::string handle_line(const std::string& line) {
    std::lock_guard lock(mu_);
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
      if (!req.is_object()) throw ValidationError("request must be a JSON object");
    } catch (const std::exception& e) {
      return error_reply(nullptr, "malformed", e.what());
    }
    const nlohmann::json session = req.contains("session") ? req["session"] : nlohmann::json();
    try {
      const std::string kind = req.at("kind").get<std::string>();
      const std::string id = req.at("session").get<std::string>();
      if (kind == "register") return on_register(id, req);
      if (kind == "epoch_report") return on_report(id, req);
      if (kind == "finalize") return on_finalize(id, req);
      return error_reply(session, "protocol", "unsupported message kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
      return error_reply(session, "malformed", e.what());
    } catch (const ValidationError& e) {
      return error_reply(session, "malformed", e.what());
    } catch (const ProtocolViolation& e) {
      return error_reply(session, "protocol", e.what());
    }
  }

  /// Snapshot of the best ledger (normalized, descending).
  std::vector<double> best() const {
    std::lock_guard lock(mu_);
    return best_;
  }

  const SequentialRegressionModel& model() const { return model_; }

 private:
  struct ProtocolViolation : Error {
    using Error::Error;
  };

  struct Session {
    ConfigDescriptor config;
    std::vector<double> raw;
  };

  static std::string error_reply(const nlohmann::json& session, const std::string& code, const std::string& msg) {
    nlohmann::json r{{"kind", "error"}, {"code", code}, {"message", msg}};
    if (!session.is_null()) r["session"] = session;
    return r.dump();
  }

  static std::string ack(const std::string& id) { return nlohmann::json{{"kind", "ack"}, {"session", id}}.dump(); }

  Session& open_session(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ProtocolViolation("session '" + id + "' is not registered or already closed");
    return it->second;
  }

  std::string on_register(const std::string& id, const nlohmann::json& req) {
    if (sessions_.contains(id)) throw ProtocolViolation("session '" + id + "' is already registered");
    Session s;
    const auto& cfg = req.at("config");
    s.config.ap = cfg.value("ap", nlohmann::json::object()).get<std::map<std::string, double>>();
    s.config.hp = cfg.value("hp", nlohmann::json::object()).get<std::map<std::string, double>>();
    if (!model_.keys.matches(s.config)) throw ValidationError("config key set differs from the model's");
    sessions_.emplace(id, std::move(s));
    return ack(id);
  }

  std::string on_report(const std::string& id, const nlohmann::json& req) {
    Session& s = open_session(id);
    const int epoch = req.at("epoch").get<int>();
    const double value = req.at("value").get<double>();
    const int expected = static_cast<int>(s.raw.size()) + 1;
    if (epoch != expected)
      throw ProtocolViolation("session '" + id + "' expected epoch " + std::to_string(expected) + ", got " +
                              std::to_string(epoch));
    if (epoch > model_.horizon) throw ProtocolViolation("epoch exceeds the model horizon");
    if (!value_in_range(value, model_.orientation)) throw ValidationError("metric value out of range");
    s.raw.push_back(value);

    nlohmann::json r{{"kind", "decision"}, {"session", id}, {"epoch", epoch}, {"action", "continue"},
                     {"probability", 0.0}, {"reference", nullptr}, {"predicted", nullptr}, {"sigma", nullptr}};
    if (model_.has(epoch)) {
      const FinalPrediction p = model_.predict_normalized(s.config, model_.orientation.normalize(s.raw));
      const Decision d = should_terminate(policy_, p.value, p.sigma, best_);
      r["predicted"] = model_.orientation.denormalize(p.value);
      r["sigma"] = p.sigma;
      r["probability"] = d.probability;
      if (d.reference != kNegInf) r["reference"] = model_.orientation.denormalize(d.reference);
      if (d.action == Action::terminate) {
        r["action"] = "terminate";
        record(p.value);
        sessions_.erase(id);
      }
    }
    return r.dump();
  }

  std::string on_finalize(const std::string& id, const nlohmann::json& req) {
    Session& s = open_session(id);
    double value = 0.0;
    if (req.contains("value")) {
      value = req.at("value").get<double>();
    } else if (static_cast<int>(s.raw.size()) == model_.horizon) {
      value = s.raw.back();
    } else {
      throw ProtocolViolation("finalize needs a value unless all " + std::to_string(model_.horizon) + " epochs were reported");
    }
    if (!value_in_range(value, model_.orientation)) throw ValidationError("final value out of range");
    record(model_.orientation.normalize(value));
    sessions_.erase(id);
    return ack(id);
  }

  void record(double score) {
    update_best(best_, score);
    if (ledger_path_) {
      const nlohmann::json doc{{"format", kLedgerFormat}, {"version", 1}, {"scores", best_}};
      write_file_atomic(*ledger_path_, doc.dump() + "\n");
    }
  }

  void load_ledger() {
    try {
      const auto doc = nlohmann::json::parse(read_file(*ledger_path_));
      if (doc.at("format").get<std::string>() != kLedgerFormat) throw ValidationError("not a best-ledger file");
      if (doc.at("version").get<int>() != 1) throw VersionError("unsupported best-ledger version");
      for (double v : doc.at("scores").get<std::vector<double>>()) update_best(best_, v);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed best-ledger file: ") + e.what());
    }
  }

  mutable std::mutex mu_;
  SequentialRegressionModel model_;
  TerminationPolicy policy_;
  std::optional<std::filesystem::path> ledger_path_;
  std::map<std::string, Session> sessions_;
  std::vector<double> best_;
};

/// Serves requests line by line until EOF.
inline void serve_stream(AdvisorService& service, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << service.handle_line(line) << '\n';
    out.flush();
  }
}

/// Line-delimited TCP listener; one thread per connection, all sharing the
/// service. stop() closes the listener and joins the connection threads.
class TcpAdvisorServer {
 public:
  explicit TcpAdvisorServer(AdvisorService& service) : service_(service) {}
  ~TcpAdvisorServer() { stop(); }

  TcpAdvisorServer(const TcpAdvisorServer&) = delete;
  TcpAdvisorServer& operator=(const TcpAdvisorServer&) = delete;

  /// Binds 127.0.0.1:port (0 picks a free port) and returns the bound port.
  int start(int port, const std::string& host = "127.0.0.1") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw Error("bad listen address '" + host + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw Error("bind() failed");
    if (::listen(listen_fd_, 16) != 0) throw Error("listen() failed");
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    return ntohs(addr.sin_port);
  }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
      std::lock_guard lock(mu_);
      for (int fd : clients_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }

  /// Blocks until stop() is called from another thread.
  void wait() {
    if (acceptor_.joinable()) acceptor_.join();
  }

 private:
  void accept_loop() {
    while (running_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (!running_) break;
        continue;
      }
      std::lock_guard lock(mu_);
      clients_.push_back(fd);
      workers_.emplace_back([this, fd] { serve_client(fd); });
    }
  }

  void serve_client(int fd) {
    std::string buf;
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = buf.find('\n')) != std::string::npos) {
        const std::string line = buf.substr(0, pos);
        buf.erase(0, pos + 1);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string reply = service_.handle_line(line) + "\n";
        std::size_t sent = 0;
        while (sent < reply.size()) {
          const ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
          if (w <= 0) break;
          sent += static_cast<std::size_t>(w);
        }
      }
    }
    {
      std::lock_guard lock(mu_);
      std::erase(clients_, fd);
    }
    ::close(fd);
  }

  AdvisorService& service_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> clients_;
  std::vector<std::thread> workers_;
};

}  // namespace lcpred::io
