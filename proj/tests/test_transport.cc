#include <chrono>
#include <future>
#include <thread>

#include "doctest.h"
#include "flowbench/error.h"
#include "flowbench/transport.h"

using namespace flowbench;
using namespace std::chrono_literals;

namespace {

BridgeMessage Sample(int i) { return FrameMetaMsg{0.2 * i, "frame-" + std::to_string(i)}; }

void Exchange(MessageChannel& a, MessageChannel& b) {
  for (int i = 0; i < 20; ++i) a.Send(Sample(i));
  for (int i = 0; i < 20; ++i) {
    auto m = b.Receive(2000ms);
    REQUIRE(m.has_value());
    CHECK(*m == Sample(i));
  }
  b.Send(AckMsg{"pong"});
  auto r = a.Receive(2000ms);
  REQUIRE(r.has_value());
  CHECK(std::get<AckMsg>(*r).ref == "pong");
}

}  // namespace

TEST_CASE("loopback pair") {
  auto [x, y] = MakeLoopbackPair();
  MessageChannel a(std::move(x)), b(std::move(y));
  Exchange(a, b);
  CHECK(!b.Receive(20ms).has_value());
  a.Close();
  CHECK_THROWS_AS(b.Receive(200ms), Error);
}

TEST_CASE("endpoint parsing") {
  const Endpoint e = ParseEndpoint("10.0.0.2:7000");
  CHECK(e.host == "10.0.0.2");
  CHECK(e.port == 7000);
  CHECK(ParseEndpoint(":81").port == 81);
  CHECK(ParseEndpoint(":81").host == "127.0.0.1");
  CHECK_THROWS_AS(ParseEndpoint("nohost"), Error);
  CHECK_THROWS_AS(ParseEndpoint("h:99999"), Error);
}

TEST_CASE("tcp raw framing") {
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  REQUIRE(listener.port() > 0);
  auto server = std::async(std::launch::async, [&] {
    auto raw = listener.Accept(2000ms);
    REQUIRE(raw);
    return NegotiateClient(std::move(raw), 500ms);
  });
  MessageChannel client(TcpConnect(Endpoint{"127.0.0.1", listener.port()}, 2000ms));
  client.Send(Sample(0));
  AcceptedClient accepted = server.get();
  CHECK(!accepted.websocket);
  MessageChannel peer(std::move(accepted.stream), std::move(accepted.leftover));
  auto first = peer.Receive(2000ms);
  REQUIRE(first.has_value());
  CHECK(*first == Sample(0));
  Exchange(client, peer);
  Exchange(peer, client);
}

TEST_CASE("tcp websocket framing") {
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  auto server = std::async(std::launch::async, [&] {
    auto raw = listener.Accept(2000ms);
    REQUIRE(raw);
    return NegotiateClient(std::move(raw), 1000ms);
  });
  MessageChannel client(WebSocketConnect(Endpoint{"127.0.0.1", listener.port()}, 2000ms));
  AcceptedClient accepted = server.get();
  CHECK(accepted.websocket);
  MessageChannel peer(std::move(accepted.stream), std::move(accepted.leftover));
  Exchange(client, peer);
  Exchange(peer, client);

  // Payloads in the 16-bit and the 64-bit WebSocket length forms.
  RemoteQueryMsg big;
  for (int i = 0; i < 3000; ++i) big.obs.visible.push_back(VisibleObject{"obj" + std::to_string(i)});
  InstructionStartMsg text{"id", std::string(60000, 'x')};
  peer.Send(big);
  client.Send(text);
  auto got = client.Receive(2000ms);
  REQUIRE(got.has_value());
  CHECK(std::get<RemoteQueryMsg>(*got) == big);
  auto got2 = peer.Receive(2000ms);
  REQUIRE(got2.has_value());
  CHECK(std::get<InstructionStartMsg>(*got2) == text);
}

TEST_CASE("connect to a closed port fails") {
  int port = 0;
  {
    TcpListener l(Endpoint{"127.0.0.1", 0});
    port = l.port();
  }
  CHECK_THROWS_AS(TcpConnect(Endpoint{"127.0.0.1", port}, 300ms), Error);
}
