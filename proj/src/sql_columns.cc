#include "schemasift/sql_columns.h"

#include <algorithm>
#include <memory>
#include <optional>

#include "schemasift/error.h"
#include "schemasift/text.h"

namespace schemasift {

namespace {

enum class TokenKind { Ident, QuotedIdent, DoubleQuoted, String, Number, Symbol, End };

struct Token {
    TokenKind kind;
    std::string text;
    size_t offset;
};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9') || c == '$'; }

std::vector<Token> lex(std::string_view sql) {
    std::vector<Token> out;
    size_t i = 0;
    auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::Parse, what + " at offset " + std::to_string(i));
    };
    while (i < sql.size()) {
        char c = sql[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            if (end == std::string_view::npos) fail("unterminated comment");
            i = end + 2;
        } else if (c == '\'' || c == '"' || c == '`') {
            size_t start = i++;
            std::string text;
            while (true) {
                if (i >= sql.size()) fail("unterminated quoted token");
                if (sql[i] == c) {
                    if (i + 1 < sql.size() && sql[i + 1] == c) {
                        text += c;
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text += sql[i++];
            }
            auto kind = c == '\'' ? TokenKind::String : c == '"' ? TokenKind::DoubleQuoted : TokenKind::QuotedIdent;
            out.push_back({kind, std::move(text), start});
        } else if (c == '[') {
            size_t start = i;
            auto end = sql.find(']', i);
            if (end == std::string_view::npos) fail("unterminated bracket identifier");
            out.push_back({TokenKind::QuotedIdent, std::string(sql.substr(i + 1, end - i - 1)), start});
            i = end + 1;
        } else if ((c >= '0' && c <= '9') || (c == '.' && i + 1 < sql.size() && sql[i + 1] >= '0' && sql[i + 1] <= '9')) {
            size_t start = i;
            while (i < sql.size() && (is_ident_char(sql[i]) || sql[i] == '.')) {
                if ((sql[i] == 'e' || sql[i] == 'E') && i + 1 < sql.size() && (sql[i + 1] == '+' || sql[i + 1] == '-')) ++i;
                ++i;
            }
            out.push_back({TokenKind::Number, std::string(sql.substr(start, i - start)), start});
        } else if (is_ident_start(c)) {
            size_t start = i;
            while (i < sql.size() && is_ident_char(sql[i])) ++i;
            out.push_back({TokenKind::Ident, std::string(sql.substr(start, i - start)), start});
        } else {
            static const char* two_char[] = {"<>", "!=", "<=", ">=", "==", "||", "<<", ">>", "::"};
            std::string sym(1, c);
            if (i + 1 < sql.size()) {
                std::string pair{c, sql[i + 1]};
                for (auto* t : two_char) {
                    if (pair == t) sym = pair;
                }
            }
            if (std::string_view("(),.;*+-/%=<>|&~!:?@").find(c) == std::string_view::npos) {
                fail(std::string("unexpected character '") + c + "'");
            }
            out.push_back({TokenKind::Symbol, sym, i});
            i += sym.size();
        }
    }
    out.push_back({TokenKind::End, "", sql.size()});
    return out;
}

bool is_reserved(std::string_view word) {
    static const char* reserved[] = {
        "select", "from",   "where",  "group",   "by",      "having",  "order",  "limit",     "offset",
        "union",  "intersect", "except", "all",  "distinct", "as",     "on",     "join",      "inner",
        "left",   "right",  "full",   "outer",   "cross",   "natural", "using",  "and",       "or",
        "not",    "in",     "is",     "null",    "like",    "glob",    "between", "exists",   "case",
        "when",   "then",   "else",   "end",     "asc",     "desc",    "with",   "over",      "true",
        "false",  "cast",   "escape", "regexp",  "ilike",   "window",  "nulls",  "collate",   "qualify",
        "lateral", "fetch", "any",    "some",
    };
    for (auto* r : reserved) {
        if (iequals(word, r)) return true;
    }
    return false;
}

/// One output column of a SELECT core, for resolving references into derived tables.
struct SelectItem {
    std::optional<std::string> name;
    bool star = false;
    std::optional<std::string> star_qualifier;
};

struct Scope;

struct Source {
    std::string alias;  // lower-case
    std::string table_name;  // lower-case; empty for derived tables
    const TableDef* table = nullptr;
    Scope* derived = nullptr;
};

struct PendingRef {
    std::optional<std::string> qualifier;
    std::string name;
    bool maybe_string = false;
    bool star = false;
    size_t offset = 0;
};

struct UsingRef {
    std::string column;
    size_t right_source;
    size_t offset;
};

struct Scope {
    Scope* parent = nullptr;
    std::vector<Source> sources;
    std::vector<SelectItem> items;
    std::vector<PendingRef> refs;
    std::vector<UsingRef> usings;
};

class Extractor {
   public:
    Extractor(std::string_view sql, const DatabaseSchema& schema) : tokens_(lex(sql)), schema_(schema) {}

    ColumnSet run() {
        if (at_keyword("with")) unsupported("common table expressions (WITH)");
        if (!at_keyword("select")) unsupported("statement must start with SELECT");
        parse_compound(nullptr);
        while (at_symbol(";")) ++pos_;
        if (peek().kind != TokenKind::End) fail("unexpected trailing token '" + peek().text + "'");
        for (auto& scope : scopes_) resolve(*scope);
        return std::move(result_);
    }

   private:
    std::vector<Token> tokens_;
    size_t pos_ = 0;
    const DatabaseSchema& schema_;
    std::vector<std::unique_ptr<Scope>> scopes_;
    ColumnSet result_;

    const Token& peek(size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::Parse, what + " at offset " + std::to_string(peek().offset));
    }
    [[noreturn]] void unsupported(const std::string& what) const {
        throw Error(ErrorCode::UnsupportedSyntax, what + " at offset " + std::to_string(peek().offset));
    }

    bool keyword_at(size_t ahead, std::string_view kw) const {
        auto& t = peek(ahead);
        return t.kind == TokenKind::Ident && iequals(t.text, kw);
    }
    bool at_keyword(std::string_view kw) const { return keyword_at(0, kw); }
    bool at_symbol(std::string_view s) const { return peek().kind == TokenKind::Symbol && peek().text == s; }

    bool accept_keyword(std::string_view kw) {
        if (!at_keyword(kw)) return false;
        ++pos_;
        return true;
    }
    bool accept_symbol(std::string_view s) {
        if (!at_symbol(s)) return false;
        ++pos_;
        return true;
    }
    void expect_keyword(std::string_view kw) {
        if (!accept_keyword(kw)) fail("expected " + to_lower(kw) + ", got '" + peek().text + "'");
    }
    void expect_symbol(std::string_view s) {
        if (!accept_symbol(s)) fail("expected '" + std::string(s) + "', got '" + peek().text + "'");
    }

    bool at_name() const {
        auto& t = peek();
        if (t.kind == TokenKind::QuotedIdent || t.kind == TokenKind::DoubleQuoted) return true;
        return t.kind == TokenKind::Ident && !is_reserved(t.text);
    }

    std::string take_name() {
        if (!at_name()) fail("expected an identifier, got '" + peek().text + "'");
        return tokens_[pos_++].text;
    }

    Scope* new_scope(Scope* parent) {
        scopes_.push_back(std::make_unique<Scope>());
        scopes_.back()->parent = parent;
        return scopes_.back().get();
    }

    bool at_subquery_start() const { return at_keyword("select") || at_keyword("with"); }

    /// Returns the first core's scope; its items define the compound's output columns.
    Scope* parse_compound(Scope* parent) {
        if (at_keyword("with")) unsupported("common table expressions (WITH)");
        Scope* first = parse_core(parent);
        Scope* last = first;
        while (at_keyword("union") || at_keyword("intersect") || at_keyword("except") || at_keyword("minus")) {
            ++pos_;
            accept_keyword("all") || accept_keyword("distinct");
            last = parse_core(parent);
        }
        if (accept_keyword("order")) {
            expect_keyword("by");
            do {
                parse_expr(last);
                accept_keyword("asc") || accept_keyword("desc");
                if (accept_keyword("nulls")) {
                    if (!accept_keyword("first") && !accept_keyword("last")) fail("expected FIRST or LAST");
                }
            } while (accept_symbol(","));
        }
        if (accept_keyword("limit")) {
            parse_expr(last);
            if (accept_keyword("offset") || accept_symbol(",")) parse_expr(last);
        }
        if (accept_keyword("offset")) parse_expr(last);
        return first;
    }

    Scope* parse_core(Scope* parent) {
        expect_keyword("select");
        Scope* scope = new_scope(parent);
        accept_keyword("distinct") || accept_keyword("all");
        do {
            parse_select_item(scope);
        } while (accept_symbol(","));
        if (accept_keyword("from")) parse_from(scope);
        if (accept_keyword("where")) parse_expr(scope);
        if (accept_keyword("group")) {
            expect_keyword("by");
            do {
                parse_expr(scope);
            } while (accept_symbol(","));
        }
        if (accept_keyword("having")) parse_expr(scope);
        if (at_keyword("window") || at_keyword("qualify")) unsupported("window clauses");
        return scope;
    }

    void parse_select_item(Scope* scope) {
        SelectItem item;
        if (at_symbol("*")) {
            scope->refs.push_back({std::nullopt, "*", false, true, peek().offset});
            ++pos_;
            item.star = true;
            scope->items.push_back(item);
            return;
        }
        if (at_name() && peek(1).kind == TokenKind::Symbol && peek(1).text == "." && peek(2).kind == TokenKind::Symbol &&
            peek(2).text == "*") {
            auto offset = peek().offset;
            auto qualifier = to_lower(take_name());
            pos_ += 2;
            scope->refs.push_back({qualifier, "*", false, true, offset});
            item.star = true;
            item.star_qualifier = qualifier;
            scope->items.push_back(item);
            return;
        }
        size_t before = scope->refs.size();
        size_t start = pos_;
        parse_expr(scope);
        // A bare column reference keeps its own name as the output name.
        if (scope->refs.size() == before + 1 && !scope->refs.back().star) {
            size_t consumed = pos_ - start;
            if (consumed == 1 || consumed == 3 || consumed == 5) item.name = to_lower(scope->refs.back().name);
        }
        if (accept_keyword("as")) {
            auto& t = peek();
            if (t.kind == TokenKind::String || at_name()) {
                item.name = to_lower(tokens_[pos_++].text);
            } else {
                fail("expected alias after AS");
            }
        } else if (at_name()) {
            item.name = to_lower(take_name());
        }
        scope->items.push_back(item);
    }

    void parse_from(Scope* scope) {
        parse_table_ref(scope);
        while (true) {
            if (accept_symbol(",")) {
                parse_table_ref(scope);
                continue;
            }
            if (at_keyword("natural")) unsupported("NATURAL joins");
            bool join = false;
            if (accept_keyword("join")) {
                join = true;
            } else if (at_keyword("inner") || at_keyword("cross") || at_keyword("left") || at_keyword("right") ||
                       at_keyword("full")) {
                ++pos_;
                accept_keyword("outer");
                expect_keyword("join");
                join = true;
            }
            if (!join) break;
            if (at_keyword("lateral")) unsupported("LATERAL joins");
            parse_table_ref(scope);
            if (accept_keyword("on")) {
                parse_expr(scope);
            } else if (accept_keyword("using")) {
                expect_symbol("(");
                do {
                    auto offset = peek().offset;
                    scope->usings.push_back({to_lower(take_name()), scope->sources.size() - 1, offset});
                } while (accept_symbol(","));
                expect_symbol(")");
            }
        }
    }

    std::optional<std::string> parse_alias() {
        if (accept_keyword("as")) return to_lower(take_name());
        if (at_name()) return to_lower(take_name());
        return std::nullopt;
    }

    void parse_table_ref(Scope* scope) {
        if (accept_symbol("(")) {
            if (at_subquery_start()) {
                Scope* inner = parse_compound(scope->parent);
                expect_symbol(")");
                Source src;
                src.derived = inner;
                if (auto alias = parse_alias()) src.alias = *alias;
                scope->sources.push_back(std::move(src));
            } else {
                parse_from(scope);
                expect_symbol(")");
            }
            return;
        }
        auto offset = peek().offset;
        std::string name = take_name();
        while (accept_symbol(".")) name = take_name();
        if (peek().kind == TokenKind::Symbol && peek().text == "(") unsupported("table-valued functions");
        // Backtick identifiers can carry a whole project.dataset.table path.
        if (auto dot = name.rfind('.'); dot != std::string::npos) name = name.substr(dot + 1);
        const TableDef* table = schema_.find_table(name);
        if (!table) {
            throw Error(ErrorCode::UnknownTable, "table '" + name + "' at offset " + std::to_string(offset) +
                                                     " is not in schema " + schema_.db_id);
        }
        Source src;
        src.table = table;
        src.table_name = to_lower(table->name);
        src.alias = parse_alias().value_or(src.table_name);
        scope->sources.push_back(std::move(src));
    }

    void parse_expr_list_or_subquery(Scope* scope) {
        expect_symbol("(");
        if (at_subquery_start()) {
            parse_compound(scope);
        } else if (!at_symbol(")")) {
            do {
                parse_expr(scope);
            } while (accept_symbol(","));
        }
        expect_symbol(")");
    }

    void parse_expr(Scope* scope) {
        parse_and(scope);
        while (accept_keyword("or")) parse_and(scope);
    }

    void parse_and(Scope* scope) {
        parse_not(scope);
        while (accept_keyword("and")) parse_not(scope);
    }

    void parse_not(Scope* scope) {
        if (accept_keyword("not")) {
            parse_not(scope);
            return;
        }
        parse_predicate(scope);
    }

    void parse_predicate(Scope* scope) {
        parse_additive(scope);
        while (true) {
            if (peek().kind == TokenKind::Symbol &&
                (at_symbol("=") || at_symbol("==") || at_symbol("!=") || at_symbol("<>") || at_symbol("<") ||
                 at_symbol(">") || at_symbol("<=") || at_symbol(">="))) {
                ++pos_;
                if (at_keyword("all") || at_keyword("any") || at_keyword("some")) {
                    ++pos_;
                    parse_expr_list_or_subquery(scope);
                } else {
                    parse_additive(scope);
                }
                continue;
            }
            bool negated = accept_keyword("not");
            if (accept_keyword("like") || accept_keyword("glob") || accept_keyword("regexp") ||
                accept_keyword("ilike")) {
                parse_additive(scope);
                if (accept_keyword("escape")) parse_additive(scope);
                continue;
            }
            if (accept_keyword("in")) {
                parse_expr_list_or_subquery(scope);
                continue;
            }
            if (accept_keyword("between")) {
                parse_additive(scope);
                expect_keyword("and");
                parse_additive(scope);
                continue;
            }
            if (negated) fail("expected LIKE, IN or BETWEEN after NOT");
            if (accept_keyword("is")) {
                accept_keyword("not");
                accept_keyword("distinct") && (expect_keyword("from"), true);
                parse_additive(scope);
                continue;
            }
            if (accept_keyword("isnull") || accept_keyword("notnull")) continue;
            break;
        }
    }

    void parse_additive(Scope* scope) {
        parse_unary(scope);
        while (peek().kind == TokenKind::Symbol) {
            auto& s = peek().text;
            if (s == "+" || s == "-" || s == "*" || s == "/" || s == "%" || s == "||" || s == "&" || s == "|" ||
                s == "<<" || s == ">>") {
                ++pos_;
                parse_unary(scope);
            } else if (s == "::") {
                ++pos_;
                parse_type_name();
            } else {
                break;
            }
        }
        if (accept_keyword("collate")) take_name();
    }

    void parse_unary(Scope* scope) {
        if (at_symbol("-") || at_symbol("+") || at_symbol("~")) {
            ++pos_;
            parse_unary(scope);
            return;
        }
        parse_primary(scope);
    }

    void parse_type_name() {
        take_name();
        while (at_name()) take_name();
        if (accept_symbol("(")) {
            while (!at_symbol(")")) {
                if (peek().kind == TokenKind::End) fail("unterminated type");
                ++pos_;
            }
            expect_symbol(")");
        }
    }

    void parse_function_args(Scope* scope) {
        expect_symbol("(");
        if (accept_symbol(")")) return;
        accept_keyword("distinct") || accept_keyword("all");
        if (accept_symbol("*")) {
            expect_symbol(")");
            return;
        }
        do {
            parse_expr(scope);
            if (accept_keyword("order")) unsupported("ordered aggregate arguments");
        } while (accept_symbol(","));
        expect_symbol(")");
    }

    void parse_primary(Scope* scope) {
        auto& t = peek();
        switch (t.kind) {
            case TokenKind::Number:
            case TokenKind::String:
                ++pos_;
                return;
            case TokenKind::End:
                fail("unexpected end of statement");
            case TokenKind::Symbol:
                if (t.text == "(") {
                    ++pos_;
                    if (at_subquery_start()) {
                        parse_compound(scope);
                    } else {
                        do {
                            parse_expr(scope);
                        } while (accept_symbol(","));
                    }
                    expect_symbol(")");
                    return;
                }
                if (t.text == "?" || t.text == ":" || t.text == "@") {
                    ++pos_;
                    if (at_name() || peek().kind == TokenKind::Number) ++pos_;
                    return;
                }
                fail("unexpected '" + t.text + "'");
            default:
                break;
        }
        if (t.kind == TokenKind::Ident) {
            if (accept_keyword("null") || accept_keyword("true") || accept_keyword("false") ||
                accept_keyword("current_date") || accept_keyword("current_time") ||
                accept_keyword("current_timestamp")) {
                return;
            }
            if (accept_keyword("exists")) {
                expect_symbol("(");
                parse_compound(scope);
                expect_symbol(")");
                return;
            }
            if (accept_keyword("case")) {
                if (!at_keyword("when")) parse_expr(scope);
                while (accept_keyword("when")) {
                    parse_expr(scope);
                    expect_keyword("then");
                    parse_expr(scope);
                }
                if (accept_keyword("else")) parse_expr(scope);
                expect_keyword("end");
                return;
            }
            if (accept_keyword("cast")) {
                expect_symbol("(");
                parse_expr(scope);
                expect_keyword("as");
                parse_type_name();
                expect_symbol(")");
                return;
            }
            if (at_keyword("select") || at_keyword("with")) unsupported("subquery without parentheses");
            // Function call; reserved words such as LEFT / RIGHT double as function names.
            if (peek(1).kind == TokenKind::Symbol && peek(1).text == "(") {
                ++pos_;
                parse_function_args(scope);
                if (at_keyword("over")) unsupported("window functions (OVER)");
                if (at_keyword("filter")) unsupported("aggregate FILTER clauses");
                return;
            }
            if (is_reserved(t.text)) fail("unexpected keyword '" + t.text + "'");
        }
        // Column reference: name, qualifier.name, or schema.qualifier.name.
        size_t offset = t.offset;
        bool maybe_string = t.kind == TokenKind::DoubleQuoted;
        std::vector<std::string> parts{tokens_[pos_++].text};
        while (at_symbol(".")) {
            ++pos_;
            if (at_symbol("*")) fail("qualified * outside the select list");
            parts.push_back(take_name());
            maybe_string = false;
        }
        if (peek().kind == TokenKind::Symbol && peek().text == "(") unsupported("qualified function names");
        PendingRef ref;
        ref.name = parts.back();
        if (parts.size() >= 2) ref.qualifier = to_lower(parts[parts.size() - 2]);
        ref.maybe_string = maybe_string;
        ref.offset = offset;
        scope->refs.push_back(std::move(ref));
    }

    // Resolution

    /// Lower-cased output column names of a derived table.
    std::vector<std::string> output_columns(const Scope& scope) const {
        std::vector<std::string> out;
        for (auto& item : scope.items) {
            if (!item.star) {
                if (item.name) out.push_back(*item.name);
                continue;
            }
            for (auto& src : scope.sources) {
                if (item.star_qualifier && src.alias != *item.star_qualifier) continue;
                if (src.table) {
                    for (auto& c : src.table->columns) out.push_back(to_lower(c.name));
                } else if (src.derived) {
                    auto inner = output_columns(*src.derived);
                    out.insert(out.end(), inner.begin(), inner.end());
                }
            }
        }
        return out;
    }

    bool source_has(const Source& src, const std::string& lname) const {
        if (src.table) return src.table->find_column(lname) != nullptr;
        if (src.derived) {
            auto cols = output_columns(*src.derived);
            return std::find(cols.begin(), cols.end(), lname) != cols.end();
        }
        return false;
    }

    void add_column(const Source& src, const std::string& name) {
        if (!src.table) return;  // derived columns are counted inside the subquery
        auto* c = src.table->find_column(name);
        result_.insert(ColumnRef{src.table->name, c->name});
    }

    const Source* find_source(const Scope& scope, const std::string& qualifier) const {
        for (auto& src : scope.sources) {
            if (src.alias == qualifier) return &src;
        }
        for (auto& src : scope.sources) {
            if (!src.table_name.empty() && src.table_name == qualifier) return &src;
        }
        return nullptr;
    }

    [[noreturn]] void resolution_error(ErrorCode code, const std::string& what, size_t offset) const {
        throw Error(code, what + " at offset " + std::to_string(offset));
    }

    void resolve_ref(const Scope& scope, const PendingRef& ref) {
        std::string lname = to_lower(ref.name);
        if (ref.star) {
            for (auto& src : scope.sources) {
                if (ref.qualifier && src.alias != *ref.qualifier && src.table_name != *ref.qualifier) continue;
                if (src.table) {
                    for (auto& c : src.table->columns) result_.insert(ColumnRef{src.table->name, c.name});
                }
            }
            return;
        }
        if (ref.qualifier) {
            for (const Scope* s = &scope; s; s = s->parent) {
                if (auto* src = find_source(*s, *ref.qualifier)) {
                    if (!source_has(*src, lname)) {
                        resolution_error(ErrorCode::UnknownColumn,
                                         "column '" + *ref.qualifier + "." + ref.name + "' does not exist", ref.offset);
                    }
                    add_column(*src, lname);
                    return;
                }
            }
            resolution_error(ErrorCode::UnknownTable, "qualifier '" + *ref.qualifier + "' is not in scope",
                             ref.offset);
        }
        for (const Scope* s = &scope; s; s = s->parent) {
            std::vector<const Source*> matches;
            for (auto& src : s->sources) {
                if (source_has(src, lname)) matches.push_back(&src);
            }
            if (matches.size() > 1) {
                resolution_error(ErrorCode::AmbiguousColumn,
                                 "column '" + ref.name + "' matches " + std::to_string(matches.size()) +
                                     " tables in scope",
                                 ref.offset);
            }
            if (matches.size() == 1) {
                add_column(*matches.front(), lname);
                return;
            }
            if (s == &scope) {
                for (auto& item : s->items) {
                    if (item.name && *item.name == lname) return;  // output alias
                }
            }
        }
        if (ref.maybe_string) return;
        resolution_error(ErrorCode::UnknownColumn, "column '" + ref.name + "' is not in any table in scope",
                         ref.offset);
    }

    void resolve(const Scope& scope) {
        for (auto& ref : scope.refs) resolve_ref(scope, ref);
        for (auto& u : scope.usings) {
            auto& right = scope.sources[u.right_source];
            if (!source_has(right, u.column)) {
                resolution_error(ErrorCode::UnknownColumn, "USING column '" + u.column + "' missing on right side",
                                 u.offset);
            }
            add_column(right, u.column);
            bool found = false;
            for (size_t i = 0; i < u.right_source; ++i) {
                if (source_has(scope.sources[i], u.column)) {
                    add_column(scope.sources[i], u.column);
                    found = true;
                }
            }
            if (!found) {
                resolution_error(ErrorCode::UnknownColumn, "USING column '" + u.column + "' missing on left side",
                                 u.offset);
            }
        }
    }
};

}  // namespace

ColumnSet extract_gold_columns(std::string_view sql, const DatabaseSchema& schema) {
    return Extractor(sql, schema).run();
}

LabeledExample build_labeled_example(std::string question, const std::vector<std::string>& gold_sqls,
                                     const DatabaseSchema& schema) {
    LabeledExample ex;
    ex.question = std::move(question);
    ex.db_id = schema.db_id;
    ex.gold_sql = gold_sqls;
    for (auto& sql : gold_sqls) {
        auto cols = extract_gold_columns(sql, schema);
        ex.positives.insert(cols.begin(), cols.end());
    }
    if (ex.positives.empty()) {
        throw Error(ErrorCode::EmptyPositives, "no gold statement references a column of " + schema.db_id);
    }
    for (auto& c : schema.all_columns()) {
        if (!ex.positives.count(c)) ex.negatives.insert(c);
    }
    return ex;
}

}  // namespace schemasift
