#include "flowbench/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <random>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void TransportFail(const std::string& what) { throw Error(ErrorCode::kTransportError, what); }

// ---- loopback ----

struct LoopbackPipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> data;
  bool closed = false;
};

class LoopbackStream : public ByteStream {
 public:
  LoopbackStream(std::shared_ptr<LoopbackPipe> in, std::shared_ptr<LoopbackPipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackStream() override { Close(); }

  void Send(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) TransportFail("loopback peer closed");
    out_->data.insert(out_->data.end(), bytes.begin(), bytes.end());
    out_->cv.notify_all();
  }

  Bytes Receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait_for(lock, timeout, [&] { return !in_->data.empty() || in_->closed; });
    if (in_->data.empty()) {
      if (in_->closed) TransportFail("loopback peer closed");
      return {};
    }
    Bytes out(in_->data.begin(), in_->data.end());
    in_->data.clear();
    return out;
  }

  void Close() override {
    for (auto& pipe : {in_, out_}) {
      std::lock_guard lock(pipe->mu);
      pipe->closed = true;
      pipe->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<LoopbackPipe> in_;
  std::shared_ptr<LoopbackPipe> out_;
};

// ---- tcp ----

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void Send(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(send_mu_);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          pollfd p{fd_, POLLOUT, 0};
          ::poll(&p, 1, 1000);
          continue;
        }
        TransportFail(fmt::format("send failed: {}", std::strerror(errno)));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  Bytes Receive(std::chrono::milliseconds timeout) override {
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready < 0) {
      if (errno == EINTR) return {};
      TransportFail(fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (ready == 0) return {};
    Bytes buf(64 * 1024);
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n == 0) TransportFail("connection closed by peer");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) return {};
      TransportFail(fmt::format("recv failed: {}", std::strerror(errno)));
    }
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

  void Close() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  int fd_;
  std::mutex send_mu_;
};

addrinfo* Resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) TransportFail(fmt::format("cannot resolve {}:{}: {}", ep.host, ep.port, gai_strerror(rc)));
  return res;
}

// Reads until `delim` appears; returns everything read.
std::string ReadUntil(ByteStream& s, std::string_view delim, std::chrono::milliseconds timeout) {
  std::string data;
  const auto deadline = Clock::now() + timeout;
  while (data.find(delim) == std::string::npos) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) TransportFail("handshake timed out");
    Bytes chunk = s.Receive(left);
    data.append(chunk.begin(), chunk.end());
    if (data.size() > 16384) TransportFail("handshake too large");
  }
  return data;
}

std::string Base64(const unsigned char* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3), '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(n));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

std::string WebSocketAccept(const std::string& key) {
  const std::string src = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(src.data()), src.size(), digest);
  return Base64(digest, sizeof(digest));
}

std::string HeaderValue(const std::string& request, std::string_view name) {
  std::size_t pos = 0;
  while ((pos = request.find("\r\n", pos)) != std::string::npos) {
    pos += 2;
    const auto colon = request.find(':', pos);
    const auto eol = request.find("\r\n", pos);
    if (colon == std::string::npos || eol == std::string::npos || colon > eol) continue;
    std::string key = request.substr(pos, colon - pos);
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (key == name) {
      std::string v = request.substr(colon + 1, eol - colon - 1);
      const auto b = v.find_first_not_of(' ');
      const auto e = v.find_last_not_of(' ');
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    }
  }
  return {};
}

// RFC 6455 framing over an established stream. Servers send unmasked
// frames, clients masked ones.
class WebSocketStream : public ByteStream {
 public:
  WebSocketStream(std::unique_ptr<ByteStream> inner, bool client, Bytes pending)
      : inner_(std::move(inner)), client_(client), pending_(std::move(pending)), rng_(std::random_device{}()) {}

  void Send(std::span<const std::uint8_t> bytes) override { SendFrame(0x2, bytes); }

  Bytes Receive(std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    while (true) {
      if (auto payload = TryParse()) return std::move(*payload);
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) return {};
      Bytes chunk = inner_->Receive(left);
      pending_.insert(pending_.end(), chunk.begin(), chunk.end());
    }
  }

  void Close() override {
    try {
      SendFrame(0x8, {});
    } catch (const Error&) {
    }
    inner_->Close();
  }

 private:
  void SendFrame(std::uint8_t opcode, std::span<const std::uint8_t> payload) {
    Bytes frame;
    frame.push_back(static_cast<std::uint8_t>(0x80 | opcode));
    const std::uint8_t mask_bit = client_ ? 0x80 : 0x00;
    const std::size_t n = payload.size();
    if (n < 126) {
      frame.push_back(static_cast<std::uint8_t>(mask_bit | n));
    } else if (n <= 0xFFFF) {
      frame.push_back(mask_bit | 126);
      frame.push_back(static_cast<std::uint8_t>(n >> 8));
      frame.push_back(static_cast<std::uint8_t>(n));
    } else {
      frame.push_back(mask_bit | 127);
      for (int shift = 56; shift >= 0; shift -= 8) frame.push_back(static_cast<std::uint8_t>(n >> shift));
    }
    std::array<std::uint8_t, 4> mask{};
    if (client_) {
      std::lock_guard lock(rng_mu_);
      for (auto& m : mask) m = static_cast<std::uint8_t>(rng_());
      frame.insert(frame.end(), mask.begin(), mask.end());
    }
    const std::size_t base = frame.size();
    frame.insert(frame.end(), payload.begin(), payload.end());
    if (client_) {
      for (std::size_t i = 0; i < n; ++i) frame[base + i] ^= mask[i % 4];
    }
    inner_->Send(frame);
  }

  // Pops one complete data message from `pending_`, handling control frames.
  std::optional<Bytes> TryParse() {
    while (true) {
      if (pending_.size() < 2) return std::nullopt;
      const std::uint8_t b0 = pending_[0], b1 = pending_[1];
      const std::uint8_t opcode = b0 & 0x0F;
      const bool masked = (b1 & 0x80) != 0;
      std::size_t len = b1 & 0x7F;
      std::size_t pos = 2;
      if (len == 126) {
        if (pending_.size() < 4) return std::nullopt;
        len = (std::size_t{pending_[2]} << 8) | pending_[3];
        pos = 4;
      } else if (len == 127) {
        if (pending_.size() < 10) return std::nullopt;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | pending_[2 + i];
        pos = 10;
      }
      std::array<std::uint8_t, 4> mask{};
      if (masked) {
        if (pending_.size() < pos + 4) return std::nullopt;
        std::copy_n(pending_.begin() + static_cast<std::ptrdiff_t>(pos), 4, mask.begin());
        pos += 4;
      }
      if (pending_.size() < pos + len) return std::nullopt;
      Bytes payload(pending_.begin() + static_cast<std::ptrdiff_t>(pos),
                    pending_.begin() + static_cast<std::ptrdiff_t>(pos + len));
      if (masked) {
        for (std::size_t i = 0; i < len; ++i) payload[i] ^= mask[i % 4];
      }
      pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pos + len));
      switch (opcode) {
        case 0x0:
        case 0x1:
        case 0x2:
          message_.insert(message_.end(), payload.begin(), payload.end());
          if (b0 & 0x80) return std::exchange(message_, {});
          break;
        case 0x8:
          TransportFail("websocket closed by peer");
        case 0x9:
          SendFrame(0xA, payload);
          break;
        default:
          break;
      }
    }
  }

  std::unique_ptr<ByteStream> inner_;
  bool client_;
  Bytes pending_;
  Bytes message_;
  std::mutex rng_mu_;
  std::mt19937 rng_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> MakeLoopbackPair() {
  auto a_to_b = std::make_shared<LoopbackPipe>();
  auto b_to_a = std::make_shared<LoopbackPipe>();
  return {std::make_unique<LoopbackStream>(b_to_a, a_to_b), std::make_unique<LoopbackStream>(a_to_b, b_to_a)};
}

Endpoint ParseEndpoint(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kConfigError, fmt::format("address '{}' is not host:port", address));
  }
  Endpoint ep;
  ep.host = address.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  try {
    std::size_t used = 0;
    ep.port = std::stoi(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfigError, fmt::format("bad port in '{}'", address));
  }
  if (ep.port < 0 || ep.port > 65535) throw Error(ErrorCode::kConfigError, fmt::format("bad port in '{}'", address));
  return ep;
}

std::unique_ptr<ByteStream> TcpConnect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  addrinfo* res = Resolve(ep, false);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    TransportFail(fmt::format("socket failed: {}", std::strerror(errno)));
  }
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0 && errno != EINPROGRESS) {
    const int err = errno;
    ::close(fd);
    TransportFail(fmt::format("connect to {}:{} failed: {}", ep.host, ep.port, std::strerror(err)));
  }
  if (rc < 0) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc <= 0 || err != 0) {
      ::close(fd);
      TransportFail(fmt::format("connect to {}:{} failed: {}", ep.host, ep.port,
                                rc == 0 ? "timed out" : std::strerror(err)));
    }
  }
  ::fcntl(fd, F_SETFL, flags);
  return std::make_unique<TcpStream>(fd);
}

TcpListener::TcpListener(const Endpoint& ep) {
  addrinfo* res = Resolve(ep, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    TransportFail(fmt::format("socket failed: {}", std::strerror(errno)));
  }
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) < 0 || ::listen(fd_, 16) < 0) {
    const int err = errno;
    ::freeaddrinfo(res);
    ::close(fd_);
    TransportFail(fmt::format("cannot listen on {}:{}: {}", ep.host, ep.port, std::strerror(err)));
  }
  ::freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::Accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpStream>(fd);
}

AcceptedClient NegotiateClient(std::unique_ptr<ByteStream> raw, std::chrono::milliseconds timeout) {
  AcceptedClient out;
  const auto deadline = Clock::now() + timeout;
  Bytes head;
  while (head.size() < 4) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) break;
    Bytes chunk = raw->Receive(left);
    head.insert(head.end(), chunk.begin(), chunk.end());
  }
  if (head.size() >= 4 && std::memcmp(head.data(), "GET ", 4) == 0) {
    std::string request(head.begin(), head.end());
    if (request.find("\r\n\r\n") == std::string::npos) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      request += ReadUntil(*raw, "\r\n\r\n", std::max(left, std::chrono::milliseconds(1)));
    }
    const auto end = request.find("\r\n\r\n") + 4;
    const std::string key = HeaderValue(request.substr(0, end), "sec-websocket-key");
    if (key.empty()) TransportFail("websocket request lacks Sec-WebSocket-Key");
    const std::string response =
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
        "Sec-WebSocket-Accept: " + WebSocketAccept(key) + "\r\n\r\n";
    raw->Send(std::span(reinterpret_cast<const std::uint8_t*>(response.data()), response.size()));
    Bytes rest(request.begin() + static_cast<std::ptrdiff_t>(end), request.end());
    out.stream = std::make_unique<WebSocketStream>(std::move(raw), false, std::move(rest));
    out.websocket = true;
    return out;
  }
  out.stream = std::move(raw);
  out.leftover = std::move(head);
  return out;
}

std::unique_ptr<ByteStream> WebSocketConnect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto raw = TcpConnect(ep, timeout);
  unsigned char nonce[16];
  std::random_device rd;
  for (auto& b : nonce) b = static_cast<unsigned char>(rd());
  const std::string key = Base64(nonce, sizeof(nonce));
  const std::string request = fmt::format(
      "GET /bridge HTTP/1.1\r\nHost: {}:{}\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Key: {}\r\nSec-WebSocket-Version: 13\r\n\r\n",
      ep.host, ep.port, key);
  raw->Send(std::span(reinterpret_cast<const std::uint8_t*>(request.data()), request.size()));
  const std::string response = ReadUntil(*raw, "\r\n\r\n", timeout);
  if (response.rfind("HTTP/1.1 101", 0) != 0) TransportFail("websocket upgrade refused");
  const auto end = response.find("\r\n\r\n") + 4;
  if (HeaderValue(response.substr(0, end), "sec-websocket-accept") != WebSocketAccept(key)) {
    TransportFail("bad Sec-WebSocket-Accept");
  }
  Bytes rest(response.begin() + static_cast<std::ptrdiff_t>(end), response.end());
  return std::make_unique<WebSocketStream>(std::move(raw), true, std::move(rest));
}

MessageChannel::MessageChannel(std::unique_ptr<ByteStream> stream, Bytes leftover) : stream_(std::move(stream)) {
  assembler_.Feed(leftover);
}

void MessageChannel::Send(const BridgeMessage& m) { stream_->Send(EncodeMessage(m)); }

std::optional<BridgeMessage> MessageChannel::Receive(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (true) {
    if (auto frame = assembler_.NextFrame()) return DecodeMessage(*frame);
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    Bytes chunk = stream_->Receive(left);
    assembler_.Feed(chunk);
  }
}

}  // namespace flowbench
