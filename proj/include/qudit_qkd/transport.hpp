#pragma once

// Reliable ordered byte streams: POSIX TCP and an in-process loopback pair,
// plus a framed link with an optional transcript.

#include "qudit_qkd/wire.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd::net {

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Peer closed the stream (possibly mid-frame).
struct PeerClosed : TransportError {
    using TransportError::TransportError;
};

class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual void write(std::span<const std::uint8_t> bytes) = 0;
    /// Blocks until at least one byte is available; returns 0 at end of stream.
    virtual std::size_t read_some(std::span<std::uint8_t> buf) = 0;
    /// Signals end of stream to the peer; further reads still work.
    virtual void shutdown_write() = 0;
};

using StreamPtr = std::unique_ptr<ByteStream>;

/// Two connected in-memory endpoints.
std::pair<StreamPtr, StreamPtr> loopback_pair();

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "host:port" or ":port" / "port" (host defaults to 127.0.0.1).
Endpoint parse_endpoint(const std::string& text);

class TcpListener {
public:
    explicit TcpListener(const Endpoint& at);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    /// Waits up to timeout_ms (negative: forever) for one connection.
    StreamPtr accept(int timeout_ms = -1);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Retries refused connections until timeout_ms has elapsed.
StreamPtr tcp_connect(const Endpoint& to, int timeout_ms = 10000);

enum class Direction : std::uint8_t { Sent, Received };

struct TranscriptEntry {
    Direction direction;
    wire::Frame frame;
};

/// One line per frame: "> TYPE hexpayload" for sent, "< TYPE hexpayload" for
/// received.
std::string transcript_text(const std::vector<TranscriptEntry>& log);

/// Frame-level view of a byte stream. Not thread-safe for concurrent reads or
/// concurrent writes; one reader and one writer may run at the same time.
class FramedLink {
public:
    FramedLink(StreamPtr stream, std::string peer, bool record);

    void send(const wire::Frame& f);
    /// Throws PeerClosed at end of stream and wire::ProtocolError on a
    /// malformed header.
    wire::Frame receive();
    void close_write();

    const std::string& peer() const { return peer_; }
    std::uint64_t frames_sent() const { return sent_; }
    std::uint64_t frames_received() const { return received_; }
    /// Frames in the order this side sent or received them (when recording).
    const std::vector<TranscriptEntry>& transcript() const { return log_; }

private:
    StreamPtr stream_;
    std::string peer_;
    bool record_;
    wire::FrameDecoder decoder_;
    std::uint64_t sent_ = 0;
    std::uint64_t received_ = 0;
    bool write_closed_ = false;
    std::vector<TranscriptEntry> log_;
};

}  // namespace qkd::net
