#include "hacluster/infra.hpp"

#include "hacluster/protocol.hpp"

namespace hacluster {

RegistryActor::RegistryActor(Fabric& fabric, std::string name)
    : Actor(fabric, std::move(name), EndpointClass::Infrastructure) {
  attach();
}

void RegistryActor::on_message(const Envelope& e) {
  auto w = split_words(e.body);
  if (w.size() == 5 && w[0] == "BIND") {
    auto inc = std::stoull(w[4]);
    if (auto mark = fabric().fences().mark(w[2]); mark && mark->incarnation >= inc) {
      reply(e, std::string("ERR ") + std::string(to_string(Errc::AccessDenied)));
      return;
    }
    reply(e, registry_.handle(w[0] + " " + w[1] + " " + w[2] + " " + w[3]));
    return;
  }
  reply(e, registry_.handle(e.body));
}

FenceDevice::FenceDevice(Fabric& fabric, Millis fence_delay, OrdinalOf ordinal_of,
                         EpochHint epoch_hint, std::string name)
    : Actor(fabric, std::move(name), EndpointClass::Infrastructure),
      fence_delay_(fence_delay),
      ordinal_of_(std::move(ordinal_of)),
      epoch_hint_(std::move(epoch_hint)) {
  attach();
}

void FenceDevice::on_message(const Envelope& e) {
  auto req = wire::FenceRequest::parse(e.body);
  if (!req) {
    reply(e, "ERR ProtocolError");
    return;
  }
  if (!fabric().fence_ack()) {
    reply(e, "ERR FenceUnavailable");
    return;
  }
  const bool yield = ordinal_of_(e.from) > ordinal_of_(req->victim);
  if (!yield) {
    execute(e);
    return;
  }
  after(fence_delay_, [this, e] { execute(e); });
}

void FenceDevice::execute(const Envelope& request) {
  auto req = wire::FenceRequest::parse(request.body);
  if (!fabric().fence_ack()) {
    reply(request, "ERR FenceUnavailable");
    return;
  }
  auto& table = fabric().fences();
  if (auto mark = table.mark(request.from); mark && mark->incarnation >= req->requester_incarnation) {
    reply(request, "ERR AccessDenied");
    return;
  }
  const std::uint64_t epoch = std::max(req->epoch, epoch_hint_ ? epoch_hint_() : 0);
  table.fence(req->victim, epoch, req->victim_incarnation, now());
  send(req->victim, wire::fenced(epoch, req->victim_incarnation));
  reply(request, "OK " + std::to_string(epoch));
}

StoreNode::StoreNode(Fabric& fabric, const std::string& name, StoreConfig config,
                     std::shared_ptr<San> san)
    : Actor(fabric, name), server_(name, std::move(config), std::move(san)) {
  server_.attach_volume(1, 0);
  attach();
}

void StoreNode::on_message(const Envelope& e) { reply(e, server_.handle(e.body, name())); }

}  // namespace hacluster
