#include "mobforge/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "mobforge/error.hpp"

namespace mobforge {

namespace {

using nlohmann::json;

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    json run() {
        json root = json::object();
        json* table = &root;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                const bool array = peek(1) == '[';
                pos_ += array ? 2 : 1;
                skip_inline_ws();
                auto path = parse_key_path();
                skip_inline_ws();
                expect(']');
                if (array) expect(']');
                table = array ? &append_array_table(root, path) : &open_table(root, path);
                end_of_line();
                continue;
            }
            parse_assignment(*table);
            end_of_line();
        }
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    bool eof() const { return pos_ >= s_.size(); }
    char peek(std::size_t k = 0) const { return pos_ + k < s_.size() ? s_[pos_ + k] : '\0'; }

    [[noreturn]] void fail(const std::string& what) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i)
            if (s_[i] == '\n') ++line;
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + what);
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_ws_comments_newlines() {
        while (!eof()) {
            skip_inline_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') ++pos_;
            else break;
        }
    }

    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (!eof() && peek() != '\n') fail("unexpected trailing characters");
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path;
        while (true) {
            skip_inline_ws();
            path.push_back(parse_key());
            skip_inline_ws();
            if (peek() != '.') break;
            ++pos_;
        }
        return path;
    }

    std::string parse_key() {
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
            key.push_back(s_[pos_++]);
        if (key.empty()) fail("expected a key");
        return key;
    }

    static json& descend(json& node, const std::string& key, bool for_table_header) {
        json& child = node[key];
        if (child.is_null()) child = json::object();
        if (child.is_array() && for_table_header) {
            if (child.empty() || !child.back().is_object()) throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a table");
            return child.back();
        }
        if (!child.is_object()) throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a table");
        return child;
    }

    json& open_table(json& root, const std::vector<std::string>& path) {
        json* node = &root;
        for (const auto& k : path) node = &descend(*node, k, true);
        return *node;
    }

    json& append_array_table(json& root, const std::vector<std::string>& path) {
        json* node = &root;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &descend(*node, path[i], true);
        json& arr = (*node)[path.back()];
        if (arr.is_null()) arr = json::array();
        if (!arr.is_array()) fail("key '" + path.back() + "' is not an array of tables");
        arr.push_back(json::object());
        return arr.back();
    }

    void parse_assignment(json& table) {
        auto path = parse_key_path();
        skip_inline_ws();
        expect('=');
        skip_inline_ws();
        json value = parse_value();
        json* node = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &descend(*node, path[i], false);
        if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*node)[path.back()] = std::move(value);
    }

    json parse_value() {
        const char c = peek();
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    json parse_number() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            if (s_[pos_++] != '_') tok.push_back(s_[pos_ - 1]);
        if (tok.empty()) fail("expected a value");
        std::string_view t = tok;
        if (t.front() == '+') t.remove_prefix(1);
        if (t.find_first_of(".eE") == std::string_view::npos || t == "inf" || t == "nan") {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec == std::errc{} && p == t.data() + t.size()) return v;
        }
        double d = 0.0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
        if (ec != std::errc{} || p != t.data() + t.size()) fail("invalid number '" + tok + "'");
        return d;
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: fail(std::string("unsupported escape \\") + e);
            }
        }
        return out;
    }

    std::string parse_literal_string() {
        expect('\'');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = s_[pos_++];
            if (c == '\'') break;
            out.push_back(c);
        }
        return out;
    }

    json parse_array() {
        expect('[');
        json arr = json::array();
        while (true) {
            skip_ws_comments_newlines();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_ws_comments_newlines();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws_comments_newlines();
            expect(']');
            return arr;
        }
    }

    json parse_inline_table() {
        expect('{');
        json table = json::object();
        skip_inline_ws();
        if (peek() == '}') {
            ++pos_;
            return table;
        }
        while (true) {
            skip_ws_comments_newlines();
            parse_assignment(table);
            skip_ws_comments_newlines();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return table;
        }
    }
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

nlohmann::json read_config_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto text = buf.str();
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigError, path + ": " + e.what());
        }
    }
    try {
        return parse_toml(text);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.detail());
    }
}

}  // namespace mobforge
