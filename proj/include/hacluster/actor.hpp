#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "hacluster/fabric.hpp"

namespace hacluster {

/// Base for everything attached to a fabric: request/reply correlation and
/// timers bound to the endpoint's serialized execution context.
class Actor {
 public:
  using ReplyFn = std::function<void(std::optional<Envelope>)>;

  Actor(Fabric& fabric, std::string name, EndpointClass cls = EndpointClass::Node);
  virtual ~Actor();

  Actor(const Actor&) = delete;
  Actor& operator=(const Actor&) = delete;

  const std::string& name() const { return name_; }
  Fabric& fabric() const { return fabric_; }

 protected:
  /// Attaches to the fabric; must be called once the derived object is ready.
  void attach();
  void detach();

  virtual void on_message(const Envelope& e) = 0;

  void send(const std::string& to, std::string body, std::uint64_t epoch = 0);
  void reply(const Envelope& request, std::string body, std::uint64_t epoch = 0);
  /// Sends a request; `done` gets the reply or nullopt after `timeout`.
  void call(const std::string& to, std::string body, Millis timeout, ReplyFn done,
            std::uint64_t epoch = 0);
  std::uint64_t after(Millis delay, std::function<void()> fn);
  void cancel(std::uint64_t timer);
  Millis now() const { return fabric_.now(); }

 private:
  void dispatch(const Envelope& e);

  struct Pending {
    ReplyFn done;
    std::uint64_t timer = 0;
  };

  Fabric& fabric_;
  std::string name_;
  EndpointClass cls_;
  bool attached_ = false;
  std::map<std::uint64_t, Pending> pending_;
};

}  // namespace hacluster
