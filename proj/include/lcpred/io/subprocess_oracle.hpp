// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <csignal>
#include <cstdio>
#include <string>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "lcpred/common.hpp"
#include "lcpred/scheduler/hyperband.hpp"

namespace lcpred::io {

// Drives an external trainer over its stdin/stdout, one JSON object per line:
//
//   -> {"kind":"run_epoch","trial":"<key>","config":{"ap":{...},"hp":{...}}}
//   <- {"kind":"epoch_report","trial":"<key>","epoch":3,"value":0.52}
//   -> {"kind":"reset","trial":"<key>"}
//   <- {"kind":"ack","trial":"<key>"}
//
// A reply of kind "error" fails the current trial. Constructing the oracle
// sets SIGPIPE to ignored for the whole process.
class SubprocessOracle : public EpochOracle {
 public:
  SubprocessOracle(std::vector<std::string> argv, MetricOrientation orientation = {})
      : orientation_(orientation) {
    if (argv.empty()) throw PreconditionError("subprocess oracle needs a command");
    // A write to a dead trainer must fail the trial, not kill this process.
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw Error("pipe() failed");
    pid_ = ::fork();
    if (pid_ < 0) throw Error("fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> args;
      for (auto& a : argv) args.push_back(a.data());
      args.push_back(nullptr);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    out_ = ::fdopen(to_child[1], "w");
    in_ = ::fdopen(from_child[0], "r");
    if (!out_ || !in_) throw Error("fdopen() failed");
  }

  ~SubprocessOracle() override {
    if (out_) std::fclose(out_);
    if (in_) std::fclose(in_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  SubprocessOracle(const SubprocessOracle&) = delete;
  SubprocessOracle& operator=(const SubprocessOracle&) = delete;

  double run_one_epoch(const Trial& trial) override {
    const auto reply = call({{"kind", "run_epoch"},
                             {"trial", trial.key},
                             {"config", {{"ap", trial.config.ap}, {"hp", trial.config.hp}}}});
    if (reply.value("kind", "") != "epoch_report") throw Error("trainer sent '" + reply.value("kind", "") + "' for run_epoch");
    return reply.at("value").get<double>();
  }

  void reset(const Trial& trial) override {
    const auto reply = call({{"kind", "reset"}, {"trial", trial.key}});
    if (reply.value("kind", "") != "ack") throw Error("trainer did not acknowledge reset");
  }

  MetricOrientation orientation() const override { return orientation_; }

 private:
  nlohmann::json call(const nlohmann::json& req) {
    const std::string line = req.dump() + "\n";
    if (std::fputs(line.c_str(), out_) < 0 || std::fflush(out_) != 0) throw Error("trainer input closed");
    std::string reply;
    int c;
    while ((c = std::fgetc(in_)) != EOF && c != '\n') reply.push_back(static_cast<char>(c));
    if (reply.empty() && c == EOF) throw Error("trainer exited");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("trainer sent malformed JSON: ") + e.what());
    }
    if (j.value("kind", "") == "error") throw Error("trainer error: " + j.value("message", std::string("unspecified")));
    return j;
  }

  MetricOrientation orientation_;
  pid_t pid_ = -1;
  std::FILE* out_ = nullptr;
  std::FILE* in_ = nullptr;
};

}  // namespace lcpred::io
