#pragma once

// Client and reference server for the external embedder protocol: newline
// delimited JSON over a subprocess's stdio or a TCP connection.
//
//   hello  c->s {"op":"hello","proto":1}
//          s->c {"op":"hello","dim":D,"budget":B,"name":"..."}
//   embed  c->s {"op":"embed","items":[{"id":"..","text":".."},...]}
//          s->c {"op":"vecs","items":[{"id":"..","v":[...]},...]}
//   count  c->s {"op":"count","text":".."}
//          s->c {"op":"count","n":N}
//   error  s->c {"op":"err","id":<string|null>,"msg":".."}

#include "lakejoin/embed.hpp"
#include "lakejoin/util.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <optional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace lakejoin {

inline constexpr int kEmbedProtocolVersion = 1;

/// The connection broke or the peer closed it. Requests are idempotent, so
/// callers may reconnect and retry.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The peer sent something the protocol does not allow.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// The peer answered with an "err" message.
class RemoteError : public Error {
public:
    RemoteError(std::string msg, std::string item_id) : Error(std::move(msg)), item_id_(std::move(item_id)) {}
    const std::string& item_id() const { return item_id_; }

private:
    std::string item_id_;
};

/// A response lacked a vector for a requested id.
class MissingIdError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// Bidirectional line channel.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void send_line(std::string_view line) = 0;
    /// Next line without its terminator; throws TransportError at EOF.
    virtual std::string recv_line() = 0;
};

/// Line channel over a pair of file descriptors (which may be the same
/// socket). Owns the descriptors.
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd, bool is_socket = false)
        : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}

    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    ~FdChannel() override {
        if (read_fd_ >= 0) ::close(read_fd_);
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    }

    void send_line(std::string_view line) override {
        std::string buf(line);
        buf.push_back('\n');
        std::size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = is_socket_ ? ::send(write_fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                                   : ::write(write_fd_, buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string recv_line() override {
        for (;;) {
            auto nl = buffer_.find('\n', scanned_);
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                scanned_ = 0;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            scanned_ = buffer_.size();
            char chunk[65536];
            ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("read failed: ") + std::strerror(errno));
            }
            if (n == 0) throw TransportError("connection closed by peer");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    /// Closes the writing side so the peer sees EOF.
    void close_write() {
        if (is_socket_) {
            ::shutdown(write_fd_, SHUT_WR);
        } else if (write_fd_ >= 0) {
            ::close(write_fd_);
            write_fd_ = -1;
        }
    }

private:
    int read_fd_;
    int write_fd_;
    bool is_socket_;
    std::string buffer_;
    std::size_t scanned_ = 0;
};

/// Runs `sh -c command` and talks to it over its stdin/stdout.
class SubprocessChannel final : public FdChannel {
public:
    static std::unique_ptr<SubprocessChannel> spawn(const std::string& command) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0) throw TransportError("pipe failed");
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw TransportError("pipe failed");
        }
        pid_t pid = ::fork();
        if (pid < 0) throw TransportError("fork failed");
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
        ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
        return std::unique_ptr<SubprocessChannel>(new SubprocessChannel(from_child[0], to_child[1], pid));
    }

    ~SubprocessChannel() override {
        close_write();
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }

private:
    SubprocessChannel(int rfd, int wfd, pid_t pid) : FdChannel(rfd, wfd, false), pid_(pid) {}
    pid_t pid_;
};

inline std::unique_ptr<FdChannel> tcp_connect(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw TransportError("resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
        fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + host + ":" + port);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::make_unique<FdChannel>(fd, fd, true);
}

/// Opens a channel from an address: "host:port" for TCP, anything else is
/// run as a shell command speaking the protocol on stdio.
inline std::unique_ptr<LineChannel> open_channel(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon != std::string::npos && colon + 1 < address.size() && address.find(' ') == std::string::npos &&
        address.find_first_not_of("0123456789", colon + 1) == std::string::npos) {
        return tcp_connect(address.substr(0, colon), address.substr(colon + 1));
    }
    return SubprocessChannel::spawn(address);
}

/// Column embedder backed by an external process. One request is in
/// flight at a time per connection.
class ExternalEmbedder final : public ColumnEmbedder {
public:
    explicit ExternalEmbedder(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {
        auto reply = request({{"op", "hello"}, {"proto", kEmbedProtocolVersion}}, "hello");
        try {
            dim_ = reply.at("dim").get<std::size_t>();
            budget_ = reply.at("budget").get<std::size_t>();
            name_ = reply.value("name", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("bad hello reply: ") + e.what());
        }
        if (dim_ == 0) throw ProtocolError("embedder advertised dimension 0");
    }

    static std::unique_ptr<ExternalEmbedder> connect(const std::string& address) {
        return std::make_unique<ExternalEmbedder>(open_channel(address));
    }

    std::size_t dim() const override { return dim_; }
    std::size_t token_budget() const override { return budget_; }
    std::string name() const override { return name_; }

    /// Embeds (id, text) items. The reply is matched by id and returned in
    /// request order. Ids must be unique within a batch.
    std::vector<std::pair<std::string, EmbeddingVector>> embed_items(
        const std::vector<std::pair<std::string, std::string>>& items) {
        if (items.empty()) return {};
        nlohmann::json req_items = nlohmann::json::array();
        std::unordered_map<std::string, std::size_t> slot;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!slot.emplace(items[i].first, i).second) {
                throw InvalidArgument("duplicate id '" + items[i].first + "' in embed batch");
            }
            req_items.push_back({{"id", items[i].first}, {"text", items[i].second}});
        }
        auto reply = request({{"op", "embed"}, {"items", std::move(req_items)}}, "vecs");

        std::vector<std::optional<EmbeddingVector>> got(items.size());
        try {
            for (const auto& it : reply.at("items")) {
                auto id = it.at("id").get<std::string>();
                auto s = slot.find(id);
                if (s == slot.end()) throw ProtocolError("reply contains unrequested id '" + id + "'");
                EmbeddingVector v(it.at("v").get<std::vector<double>>());
                detail::check_dims(dim_, v.dim());
                got[s->second] = std::move(v);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("bad vecs reply: ") + e.what());
        }
        std::vector<std::pair<std::string, EmbeddingVector>> out;
        out.reserve(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!got[i]) throw MissingIdError("reply is missing id '" + items[i].first + "'");
            out.emplace_back(items[i].first, std::move(*got[i]));
        }
        return out;
    }

    EmbeddingVector embed(std::string_view text) override {
        return std::move(embed_items({{"0", std::string(text)}}).front().second);
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<std::pair<std::string, std::string>> items;
        items.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) items.emplace_back(std::to_string(i), texts[i]);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (auto& [id, v] : embed_items(items)) out.push_back(std::move(v));
        return out;
    }

    std::size_t count_tokens(std::string_view text) {
        auto reply = request({{"op", "count"}, {"text", std::string(text)}}, "count");
        try {
            return reply.at("n").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("bad count reply: ") + e.what());
        }
    }

    TokenCounter token_counter() override {
        return [this](std::string_view text) { return count_tokens(text); };
    }

private:
    nlohmann::json request(const nlohmann::json& msg, std::string_view expect_op) {
        channel_->send_line(msg.dump());
        std::string line = channel_->recv_line();
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ProtocolError(std::string("unparsable reply: ") + e.what());
        }
        auto op = reply.value("op", std::string{});
        if (op == "err") {
            std::string id = reply.contains("id") && reply["id"].is_string() ? reply["id"].get<std::string>() : "";
            throw RemoteError("embedder error: " + reply.value("msg", std::string{"(no message)"}), id);
        }
        if (op != expect_op) throw ProtocolError("expected '" + std::string(expect_op) + "' reply, got '" + op + "'");
        return reply;
    }

    std::unique_ptr<LineChannel> channel_;
    std::size_t dim_ = 0;
    std::size_t budget_ = 0;
    std::string name_;
};

/// Answers protocol requests on `channel` with `embedder` until the peer
/// closes the connection. Malformed requests get an "err" reply.
inline void serve_embedder(LineChannel& channel, ColumnEmbedder& embedder) {
    for (;;) {
        std::string line;
        try {
            line = channel.recv_line();
        } catch (const TransportError&) {
            return;
        }
        if (detail::trim(line).empty()) continue;
        nlohmann::json reply;
        try {
            auto msg = nlohmann::json::parse(line);
            auto op = msg.at("op").get<std::string>();
            if (op == "hello") {
                reply = {{"op", "hello"},
                         {"dim", embedder.dim()},
                         {"budget", embedder.token_budget()},
                         {"name", embedder.name()}};
            } else if (op == "embed") {
                nlohmann::json items = nlohmann::json::array();
                for (const auto& it : msg.at("items")) {
                    auto v = embedder.embed(it.at("text").get<std::string>());
                    items.push_back({{"id", it.at("id")}, {"v", v.values()}});
                }
                reply = {{"op", "vecs"}, {"items", std::move(items)}};
            } else if (op == "count") {
                reply = {{"op", "count"}, {"n", embedder.token_counter()(msg.at("text").get<std::string>())}};
            } else {
                reply = {{"op", "err"}, {"id", nullptr}, {"msg", "unknown op '" + op + "'"}};
            }
        } catch (const std::exception& e) {
            reply = {{"op", "err"}, {"id", nullptr}, {"msg", e.what()}};
        }
        try {
            channel.send_line(reply.dump());
        } catch (const TransportError&) {
            return;
        }
    }
}

/// Listening TCP socket on the loopback interface.
class TcpListener {
public:
    /// Port 0 picks a free port; see port().
    explicit TcpListener(std::uint16_t port = 0) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw TransportError("socket failed");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
            ::close(fd_);
            throw TransportError(std::string("bind/listen failed: ") + std::strerror(errno));
        }
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener() {
        if (fd_ >= 0) ::close(fd_);
    }

    std::uint16_t port() const { return port_; }

    std::unique_ptr<FdChannel> accept() {
        int c = ::accept(fd_, nullptr, nullptr);
        if (c < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
        return std::make_unique<FdChannel>(c, c, true);
    }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Builds a column embedder from "hash:<dim>:<seed>" or
/// "external:<host:port|command>".
inline std::unique_ptr<ColumnEmbedder> make_column_embedder(std::string_view spec, std::size_t budget = 512) {
    if (spec.starts_with("hash:")) {
        auto h = parse_hash_spec(spec);
        return std::make_unique<HashColumnEmbedder>(h.dim, h.seed, budget);
    }
    if (spec.starts_with("external:")) return ExternalEmbedder::connect(std::string(spec.substr(9)));
    throw InvalidArgument("unknown embedder '" + std::string(spec) + "'");
}

}  // namespace lakejoin
