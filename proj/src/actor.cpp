#include "hacluster/actor.hpp"

namespace hacluster {

Actor::Actor(Fabric& fabric, std::string name, EndpointClass cls)
    : fabric_(fabric), name_(std::move(name)), cls_(cls) {}

Actor::~Actor() { detach(); }

void Actor::attach() {
  fabric_.attach(name_, [this](const Envelope& e) { dispatch(e); }, cls_);
  attached_ = true;
}

void Actor::detach() {
  if (!attached_) return;
  attached_ = false;
  fabric_.detach(name_);
}

void Actor::dispatch(const Envelope& e) {
  if (e.reply_to != 0) {
    auto it = pending_.find(e.reply_to);
    if (it == pending_.end()) return;  // late reply after timeout
    Pending p = std::move(it->second);
    pending_.erase(it);
    fabric_.cancel(p.timer);
    p.done(e);
    return;
  }
  on_message(e);
}

void Actor::send(const std::string& to, std::string body, std::uint64_t epoch) {
  Envelope e;
  e.from = name_;
  e.to = to;
  e.epoch = epoch;
  e.body = std::move(body);
  fabric_.send(std::move(e));
}

void Actor::reply(const Envelope& request, std::string body, std::uint64_t epoch) {
  Envelope e;
  e.from = name_;
  e.to = request.from;
  e.reply_to = request.id;
  e.epoch = epoch;
  e.body = std::move(body);
  fabric_.send(std::move(e));
}

void Actor::call(const std::string& to, std::string body, Millis timeout, ReplyFn done,
                 std::uint64_t epoch) {
  Envelope e;
  e.from = name_;
  e.to = to;
  e.id = fabric_.next_id();
  e.epoch = epoch;
  e.body = std::move(body);
  const std::uint64_t id = e.id;
  const std::uint64_t timer = fabric_.schedule(name_, timeout, [this, id] {
    auto it = pending_.find(id);
    if (it == pending_.end()) return;
    Pending p = std::move(it->second);
    pending_.erase(it);
    p.done(std::nullopt);
  });
  pending_[id] = Pending{std::move(done), timer};
  fabric_.send(std::move(e));
}

std::uint64_t Actor::after(Millis delay, std::function<void()> fn) {
  return fabric_.schedule(name_, delay, std::move(fn));
}

void Actor::cancel(std::uint64_t timer) { fabric_.cancel(timer); }

}  // namespace hacluster
