#include "portsolve/netlist.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "portsolve/csv.hpp"

namespace portsolve::netlist {

namespace {

struct Token {
    enum class Type { kIdent, kNumber, kPunct, kPath, kEnd };
    Type type = Type::kEnd;
    std::string text;
    double value = 0.0;
    int line = 1;
    int col = 1;
};

[[noreturn]] void fail(NetlistError::Kind kind, const Token& at, const std::string& msg) {
    throw NetlistError(kind, at.line, at.col, msg);
}

class Lexer {
   public:
    explicit Lexer(const std::string& text) : text_(text) {}

    Token next() {
        skip_blank();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= text_.size()) return t;  // kEnd

        const char c = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                           text_[pos_] == '_'))
                t.text += take();
            t.type = Token::Type::kIdent;
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '+' || c == '-') {
            std::size_t p = pos_;
            if (text_[p] == '+' || text_[p] == '-') ++p;
            auto digits = [&] {
                while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p])))
                    ++p;
            };
            digits();
            if (p < text_.size() && text_[p] == '.') {
                ++p;
                digits();
            }
            if (p < text_.size() && (text_[p] == 'e' || text_[p] == 'E')) {
                ++p;
                if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
                digits();
            }
            t.text = text_.substr(pos_, p - pos_);
            // from_chars rejects an explicit plus sign
            const char* begin = t.text.data() + (t.text[0] == '+' ? 1 : 0);
            const char* end = t.text.data() + t.text.size();
            auto [ptr, ec] = std::from_chars(begin, end, t.value);
            if (ec != std::errc{} || ptr != end)
                throw NetlistError(NetlistError::Kind::kSyntax, t.line, t.col,
                                   "malformed number '" + t.text + "'");
            while (pos_ < p) take();
            t.type = Token::Type::kNumber;
            return t;
        }
        if (c == '=' || c == ':' || c == '(' || c == ')' || c == ',') {
            t.text = std::string(1, take());
            t.type = Token::Type::kPunct;
            return t;
        }
        throw NetlistError(NetlistError::Kind::kSyntax, t.line, t.col,
                           std::string("unexpected character '") + c + "'");
    }

    /// Rest-of-line path token (terminated by whitespace or a comment).
    Token next_path() {
        skip_blank();
        Token t;
        t.line = line_;
        t.col = col_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               text_[pos_] != '#')
            t.text += take();
        if (t.text.empty())
            throw NetlistError(NetlistError::Kind::kSyntax, t.line, t.col, "expected a path");
        t.type = Token::Type::kPath;
        return t;
    }

   private:
    char take() {
        const char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_blank() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                take();
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') take();
            } else {
                break;
            }
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
   public:
    explicit Parser(const std::string& text) : lexer_(text) { advance(); }

    NetlistDocument document() {
        NetlistDocument doc;
        keyword("space");
        keyword("N");
        punct("=");
        doc.n_samples = integer("sample count N");
        keyword("T");
        punct("=");
        doc.period_T = number();

        keyword("solver");
        keyword("alpha");
        punct("=");
        doc.alphas.push_back(number());
        while (at_keyword("alpha")) {
            advance();
            punct("=");
            doc.alphas.push_back(number());
        }
        keyword("eps");
        punct("=");
        doc.eps = number();
        keyword("maxiter");
        punct("=");
        doc.max_iter = integer("maxiter");

        if (!at_keyword("element")) fail_expect("'element'");
        while (at_keyword("element")) {
            advance();
            doc.elements.push_back(element_decl());
        }

        if (at_keyword("tree")) {
            advance();
            doc.topology = tree_expr();
        } else if (at_keyword("mixed")) {
            advance();
            MixedTopology m;
            keyword("a1");
            punct("=");
            m.a1 = element_name();
            keyword("a2");
            punct("=");
            m.a2 = element_name();
            keyword("b");
            punct("=");
            m.b = element_name();
            doc.topology = m;
        } else {
            fail_expect("'tree' or 'mixed'");
        }

        keyword("drive");
        if (at_keyword("zero")) {
            advance();
            doc.drive = DriveZero{};
        } else if (at_keyword("const")) {
            advance();
            doc.drive = DriveConst{number()};
        } else if (at_keyword("sin")) {
            advance();
            const double amplitude = number();
            doc.drive = DriveSin{amplitude, number()};
        } else if (at_keyword("csv")) {
            // the path consumes the rest of the word run; re-lex specially
            doc.drive = DriveCsv{lexer_.next_path().text};
            advance();
        } else {
            fail_expect("'zero', 'const', 'sin' or 'csv'");
        }

        if (current_.type != Token::Type::kEnd) fail_expect("end of input");
        return doc;
    }

   private:
    ElementDecl element_decl() {
        ElementDecl decl;
        const Token name_token = current_;
        decl.name = ident("element name");
        if (!declared_.insert(decl.name).second)
            fail(NetlistError::Kind::kDuplicateName, name_token,
                 "element '" + decl.name + "' is declared twice");
        punct(":");
        if (at_keyword("gain")) {
            advance();
            decl.kind = GainDecl{number()};
        } else if (at_keyword("cubic")) {
            advance();
            decl.kind = CubicDecl{number()};
        } else if (at_keyword("tf")) {
            advance();
            TfDecl tf;
            keyword("num");
            punct("=");
            tf.num = float_list();
            keyword("den");
            punct("=");
            tf.den = float_list();
            decl.kind = std::move(tf);
        } else if (at_keyword("neg")) {
            advance();
            const Token target_token = current_;
            NegDecl neg{ident("element name")};
            if (!declared_.count(neg.target))
                fail(NetlistError::Kind::kUndefinedName, target_token,
                     "neg refers to undeclared element '" + neg.target + "'");
            decl.kind = std::move(neg);
        } else {
            fail_expect("'gain', 'cubic', 'tf' or 'neg'");
        }
        return decl;
    }

    TreeExprPtr tree_expr() {
        if (at_keyword("series") || at_keyword("parallel")) {
            auto node = std::make_shared<TreeExpr>();
            node->op = at_keyword("series") ? TreeExpr::Op::kSeries : TreeExpr::Op::kParallel;
            const std::string what = current_.text;
            const Token open_token = current_;
            advance();
            punct("(");
            node->children.push_back(tree_expr());
            if (current_.type == Token::Type::kPunct && current_.text == ")")
                fail(NetlistError::Kind::kArity, open_token,
                     "'" + what + "' needs at least two operands");
            while (current_.type == Token::Type::kPunct && current_.text == ",") {
                advance();
                node->children.push_back(tree_expr());
            }
            punct(")");
            return node;
        }
        auto node = std::make_shared<TreeExpr>();
        node->op = TreeExpr::Op::kName;
        node->name = element_name();
        return node;
    }

    std::string element_name() {
        const Token t = current_;
        const std::string name = ident("element name");
        if (!declared_.count(name))
            fail(NetlistError::Kind::kUndefinedName, t,
                 "reference to undeclared element '" + name + "'");
        return name;
    }

    // --- token helpers ---

    void advance() { current_ = lexer_.next(); }

    bool at_keyword(const char* kw) const {
        return current_.type == Token::Type::kIdent && current_.text == kw;
    }

    void keyword(const char* kw) {
        if (!at_keyword(kw)) fail_expect("'" + std::string(kw) + "'");
        advance();
    }

    void punct(const char* p) {
        if (current_.type != Token::Type::kPunct || current_.text != p)
            fail_expect("'" + std::string(p) + "'");
        advance();
    }

    std::string ident(const char* what) {
        if (current_.type != Token::Type::kIdent) fail_expect(what);
        std::string s = current_.text;
        advance();
        return s;
    }

    double number() {
        if (current_.type != Token::Type::kNumber) fail_expect("a number");
        const double v = current_.value;
        advance();
        return v;
    }

    long integer(const char* what) {
        const Token t = current_;
        const double v = number();
        if (v != std::floor(v) || std::fabs(v) > 9e15)
            fail(NetlistError::Kind::kSyntax, t,
                 std::string(what) + " must be an integer");
        return static_cast<long>(v);
    }

    std::vector<double> float_list() {
        std::vector<double> values{number()};
        while (current_.type == Token::Type::kPunct && current_.text == ",") {
            advance();
            values.push_back(number());
        }
        return values;
    }

    [[noreturn]] void fail_expect(const std::string& what) {
        const std::string got = current_.type == Token::Type::kEnd
                                    ? "end of input"
                                    : "'" + current_.text + "'";
        fail(NetlistError::Kind::kSyntax, current_, "expected " + what + ", got " + got);
    }

    Lexer lexer_;
    Token current_;
    std::unordered_set<std::string> declared_;
};

}  // namespace

NetlistDocument parse(const std::string& text) { return Parser(text).document(); }

namespace {

void print_tree(std::ostream& out, const TreeExpr& e) {
    switch (e.op) {
        case TreeExpr::Op::kName:
            out << e.name;
            return;
        case TreeExpr::Op::kSeries:
            out << "series(";
            break;
        case TreeExpr::Op::kParallel:
            out << "parallel(";
            break;
    }
    for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out << ", ";
        print_tree(out, *e.children[i]);
    }
    out << ")";
}

void print_floats(std::ostream& out, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << format_double(v[i]);
    }
}

}  // namespace

std::string print(const NetlistDocument& doc) {
    std::ostringstream out;
    out << "space N=" << doc.n_samples << " T=" << format_double(doc.period_T) << '\n';
    out << "solver";
    for (double a : doc.alphas) out << " alpha=" << format_double(a);
    out << " eps=" << format_double(doc.eps) << " maxiter=" << doc.max_iter << '\n';
    for (const auto& e : doc.elements) {
        out << "element " << e.name << ": ";
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, GainDecl>)
                    out << "gain " << format_double(k.g);
                else if constexpr (std::is_same_v<T, CubicDecl>)
                    out << "cubic " << format_double(k.mu);
                else if constexpr (std::is_same_v<T, TfDecl>) {
                    out << "tf num=";
                    print_floats(out, k.num);
                    out << " den=";
                    print_floats(out, k.den);
                } else {
                    out << "neg " << k.target;
                }
            },
            e.kind);
        out << '\n';
    }
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, TreeExprPtr>) {
                out << "tree ";
                print_tree(out, *t);
            } else {
                out << "mixed a1=" << t.a1 << " a2=" << t.a2 << " b=" << t.b;
            }
            out << '\n';
        },
        doc.topology);
    out << "drive ";
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DriveZero>)
                out << "zero";
            else if constexpr (std::is_same_v<T, DriveConst>)
                out << "const " << format_double(d.value);
            else if constexpr (std::is_same_v<T, DriveSin>)
                out << "sin " << format_double(d.amplitude) << ' '
                    << format_double(d.frequency);
            else
                out << "csv " << d.path;
        },
        doc.drive);
    out << '\n';
    return std::move(out).str();
}

bool operator==(const TreeExpr& a, const TreeExpr& b) {
    if (a.op != b.op || a.name != b.name || a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!(*a.children[i] == *b.children[i])) return false;
    return true;
}

bool operator==(const NetlistDocument& a, const NetlistDocument& b) {
    if (a.n_samples != b.n_samples || a.period_T != b.period_T || a.alphas != b.alphas ||
        a.eps != b.eps || a.max_iter != b.max_iter || a.elements != b.elements ||
        !(a.drive == b.drive))
        return false;
    if (a.topology.index() != b.topology.index()) return false;
    if (const auto* t = std::get_if<TreeExprPtr>(&a.topology))
        return **t == *std::get<TreeExprPtr>(b.topology);
    return std::get<MixedTopology>(a.topology) == std::get<MixedTopology>(b.topology);
}

namespace {

OperatorSpec build_element(const ElementKind& kind,
                           const std::unordered_map<std::string, OperatorSpec>& table) {
    return std::visit(
        [&](const auto& k) -> OperatorSpec {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GainDecl>) {
                return OperatorSpec::gain(k.g);
            } else if constexpr (std::is_same_v<T, CubicDecl>) {
                const double mu = k.mu;
                return OperatorSpec::static_nonlinearity(
                    [mu](double v) { return mu * v * v * v / 3.0; },
                    [mu](double v) { return mu * v * v; }, mu >= 0.0);
            } else if constexpr (std::is_same_v<T, TfDecl>) {
                ArrayXd num(static_cast<Index>(k.num.size()));
                ArrayXd den(static_cast<Index>(k.den.size()));
                for (std::size_t i = 0; i < k.num.size(); ++i)
                    num[static_cast<Index>(i)] = k.num[i];
                for (std::size_t i = 0; i < k.den.size(); ++i)
                    den[static_cast<Index>(i)] = k.den[i];
                return OperatorSpec::lti(std::move(num), std::move(den));
            } else {
                return OperatorSpec::negated(table.at(k.target));
            }
        },
        kind);
}

std::unordered_map<std::string, OperatorSpec> element_table(const NetlistDocument& doc) {
    std::unordered_map<std::string, OperatorSpec> table;
    for (const auto& e : doc.elements) table.emplace(e.name, build_element(e.kind, table));
    return table;
}

CircuitTree lower_tree(const TreeExpr& e,
                       const std::unordered_map<std::string, OperatorSpec>& table) {
    switch (e.op) {
        case TreeExpr::Op::kName: {
            const OperatorSpec& op = table.at(e.name);
            if (!op.declared_monotone())
                throw ValidationError("element '" + e.name +
                                      "' is anti-monotone; tree leaves must be monotone");
            return CircuitTree::leaf(op);
        }
        case TreeExpr::Op::kSeries: {
            std::vector<CircuitTree> children;
            children.reserve(e.children.size());
            for (const auto& c : e.children) children.push_back(lower_tree(*c, table));
            return CircuitTree::sum(std::move(children));
        }
        case TreeExpr::Op::kParallel: {
            std::vector<CircuitTree> children;
            children.reserve(e.children.size());
            for (const auto& c : e.children)
                children.push_back(CircuitTree::inverse(lower_tree(*c, table)));
            return CircuitTree::inverse(CircuitTree::sum(std::move(children)));
        }
    }
    throw ValidationError("unreachable tree op");
}

Signal lower_drive(const NetlistDocument& doc, const std::string& base_dir) {
    const auto n = static_cast<Index>(doc.n_samples);
    const double T = doc.period_T;
    return std::visit(
        [&](const auto& d) -> Signal {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, DriveZero>) {
                return Signal::zero(n, T);
            } else if constexpr (std::is_same_v<D, DriveConst>) {
                return Signal::constant(n, T, d.value);
            } else if constexpr (std::is_same_v<D, DriveSin>) {
                ArrayXd t = ArrayXd::LinSpaced(n, 0.0, double(n - 1)) * (T / double(n));
                return Signal{d.amplitude *
                                  (2.0 * std::numbers::pi * d.frequency * t).sin(),
                              T};
            } else {
                std::string path = d.path;
                if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
                Signal s = read_csv_file(path);
                if (s.size() != n)
                    throw ValidationError("csv drive has " + std::to_string(s.size()) +
                                          " samples, netlist space expects " +
                                          std::to_string(n));
                if (std::fabs(s.period_T - T) > 1e-6 * T)
                    throw ValidationError("csv drive spans " + std::to_string(s.period_T) +
                                          " s, netlist space expects " + std::to_string(T));
                return Signal{std::move(s.samples), T};
            }
        },
        doc.drive);
}

SolverConfig lower_config(const NetlistDocument& doc) {
    SolverConfig cfg;
    cfg.alpha = doc.alphas.front();
    cfg.level_alphas = doc.alphas;
    cfg.epsilon = doc.eps;
    cfg.max_iter = doc.max_iter;
    cfg.validate();
    return cfg;
}

}  // namespace

std::vector<std::pair<std::string, OperatorSpec>> lower_elements(const NetlistDocument& doc) {
    const auto table = element_table(doc);
    std::vector<std::pair<std::string, OperatorSpec>> out;
    out.reserve(doc.elements.size());
    for (const auto& e : doc.elements) out.emplace_back(e.name, table.at(e.name));
    return out;
}

Lowered lower(const NetlistDocument& doc, const std::string& base_dir) {
    if (doc.n_samples < 2) throw ValidationError("space needs N >= 2");
    if (!(doc.period_T > 0.0)) throw ValidationError("space needs T > 0");
    const auto table = element_table(doc);
    const SolverConfig cfg = lower_config(doc);
    Signal drive = lower_drive(doc, base_dir);

    if (const auto* tree = std::get_if<TreeExprPtr>(&doc.topology))
        return LoweredTree{lower_tree(**tree, table), std::move(drive), cfg};

    const auto& m = std::get<MixedTopology>(doc.topology);
    const OperatorSpec& b = table.at(m.b);
    if (!b.declared_monotone())
        throw ValidationError(
            "element '" + m.b +
            "' is anti-monotone; the mixed b slot takes the positively-entered "
            "monotone path (the algorithm subtracts it)");
    return LoweredMixed{MixedProblem(table.at(m.a1), table.at(m.a2), b, std::move(drive)),
                        cfg};
}

}  // namespace portsolve::netlist
