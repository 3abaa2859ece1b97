#ifndef FLOWBENCH_TRANSPORT_H_
#define FLOWBENCH_TRANSPORT_H_

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "flowbench/protocol.h"

namespace flowbench {

// Bidirectional ordered byte stream. Send and Receive may run on different
// threads; each direction has a single user.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void Send(std::span<const std::uint8_t> bytes) = 0;
  // Waits up to `timeout` for data. Returns an empty buffer on timeout and
  // throws Error(kTransportError) once the peer has closed.
  virtual Bytes Receive(std::chrono::milliseconds timeout) = 0;
  virtual void Close() = 0;
};

// Two connected in-process endpoints.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> MakeLoopbackPair();

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
};
// "host:port" or ":port".
Endpoint ParseEndpoint(const std::string& address);

std::unique_ptr<ByteStream> TcpConnect(const Endpoint& ep, std::chrono::milliseconds timeout);

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<ByteStream> Accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  int port_ = 0;
};

// Server side of an incoming connection: raw bridge framing, or a WebSocket
// upgrade (browser consoles) carrying bridge frames in binary messages.
// `leftover` holds bytes already read past the handshake.
struct AcceptedClient {
  std::unique_ptr<ByteStream> stream;
  Bytes leftover;
  bool websocket = false;
};
AcceptedClient NegotiateClient(std::unique_ptr<ByteStream> raw, std::chrono::milliseconds timeout);

// Client side of the WebSocket binding.
std::unique_ptr<ByteStream> WebSocketConnect(const Endpoint& ep, std::chrono::milliseconds timeout);

// Message-level wrapper around a byte stream.
class MessageChannel {
 public:
  explicit MessageChannel(std::unique_ptr<ByteStream> stream, Bytes leftover = {});

  void Send(const BridgeMessage& m);
  std::optional<BridgeMessage> Receive(std::chrono::milliseconds timeout);
  void Close() { stream_->Close(); }

 private:
  std::unique_ptr<ByteStream> stream_;
  FrameAssembler assembler_;
};

}  // namespace flowbench

#endif  // FLOWBENCH_TRANSPORT_H_
