#!/usr/bin/env python3
"""Regenerates the bundled mini corpus, CVE map and scripted endpoint fixture.

The functions are small synthetic C snippets; only svg_probe mirrors a real
CVE. Output is deterministic.
"""
import difflib
import json
import math
import re
from pathlib import Path

HERE = Path(__file__).resolve().parent

# (name, project, path, file_offset, cve_id, cwe_id, inline_description, before, after)
VULNERABLE = [
    ("svg_probe", "FFmpeg", "libavformat/img2dec.c", 905, "CVE-2018-7751", "CWE-835", None,
     """static int svg_probe(AVProbeData *p)
{
    const uint8_t *b = p->buf;
    const uint8_t *end = p->buf + p->buf_size;

    if (memcmp(p->buf, "<?xml", 5))
        return 0;
    while (b < end) {
        b += ff_subtitles_next_line(b);
        /*
         * Give up once fewer than four bytes remain
         * for the "<svg" tag.
         */
        if (b >= end - 4)
            return 0;
        if (!memcmp(b, "<svg", 4))
            return AVPROBE_SCORE_EXTENSION + 1;
    }
    return 0;
}
""",
     """static int svg_probe(AVProbeData *p)
{
    const uint8_t *b = p->buf;
    const uint8_t *end = p->buf + p->buf_size;

    if (memcmp(p->buf, "<?xml", 5))
        return 0;
    while (b < end) {
        int inc = ff_subtitles_next_line(b);
        if (!inc)
            break;
        b += inc;
        /*
         * Give up once fewer than four bytes remain
         * for the "<svg" tag.
         */
        if (b >= end - 4)
            return 0;
        if (!memcmp(b, "<svg", 4))
            return AVPROBE_SCORE_EXTENSION + 1;
    }
    return 0;
}
"""),
    ("copy_packet", "netkit", "src/packet.c", 120, "CVE-2099-10002", "CWE-787",
     "copy_packet in netkit does not validate the source length against the packet capacity, allowing a heap buffer overflow.",
     """int copy_packet(struct packet *pkt, const uint8_t *src, size_t len)
{
    uint8_t *dst = pkt->data;

    memcpy(dst, src, len);
    pkt->size = len;
    return 0;
}
""",
     """int copy_packet(struct packet *pkt, const uint8_t *src, size_t len)
{
    uint8_t *dst = pkt->data;

    if (len > pkt->capacity)
        return -1;
    memcpy(dst, src, len);
    pkt->size = len;
    return 0;
}
"""),
    ("parse_header", "imgtool", "lib/header.c", 44, "CVE-2099-10003", "CWE-190", None,
     """static int parse_header(const uint8_t *buf, int buf_len, struct header *hdr)
{
    int count = buf[0];
    int total = count * 16;

    if (total > buf_len)
        return -1;
    hdr->count = count;
    hdr->entries = malloc(total);
    if (!hdr->entries)
        return -1;
    memcpy(hdr->entries, buf + 1, total);
    return 0;
}
""",
     """static int parse_header(const uint8_t *buf, int buf_len, struct header *hdr)
{
    int count = buf[0];
    int total = count * 16;

    if (total > buf_len - 1)
        return -1;
    hdr->count = count;
    hdr->entries = malloc(total);
    if (!hdr->entries)
        return -1;
    memcpy(hdr->entries, buf + 1, total);
    return 0;
}
"""),
    ("read_name", "tinyfs", "fs/name.c", 300, None, "CWE-193", None,
     """int read_name(char *dst, size_t dst_size, const char *src)
{
    size_t i;

    for (i = 0; i <= dst_size; i++) {
        dst[i] = src[i];
        if (src[i] == '\\0')
            break;
    }
    return (int)i;
}
""",
     """int read_name(char *dst, size_t dst_size, const char *src)
{
    size_t i;

    for (i = 0; i + 1 < dst_size; i++) {
        dst[i] = src[i];
        if (src[i] == '\\0')
            break;
    }
    dst[i] = '\\0';
    return (int)i;
}
"""),
    ("free_session", "webd", "server/session.c", 77, "CVE-2099-10005", "CWE-416",
     "A use-after-free in free_session in webd allows remote attackers to corrupt memory by closing a connection during teardown.",
     """void free_session(struct session *s)
{
    struct conn *c = s->conn;

    free(s);
    if (c)
        c->owner = s->id;
    close_conn(c);
}
""",
     """void free_session(struct session *s)
{
    struct conn *c = s->conn;

    if (c)
        c->owner = s->id;
    close_conn(c);
    free(s);
}
"""),
    ("lookup_entry", "kvstore", "src/table.c", 210, "CVE-2099-10006", "CWE-476", None,
     """int lookup_entry(struct table *t, int key)
{
    struct entry *e = table_find(t, key);
    int value = e->value;

    return value;
}
""",
     """int lookup_entry(struct table *t, int key)
{
    struct entry *e = table_find(t, key);

    if (!e)
        return -1;
    return e->value;
}
"""),
    ("format_log", "logd", "src/log.c", 58, "CVE-2099-10007", "CWE-134",
     "format_log in logd passes a user-controlled message as the format argument, allowing format string attacks.",
     """void format_log(int level, const char *msg)
{
    char line[256];

    if (level < log_level)
        return;
    snprintf(line, sizeof(line), msg);
    write_log(line);
}
""",
     """void format_log(int level, const char *msg)
{
    char line[256];

    if (level < log_level)
        return;
    snprintf(line, sizeof(line), "%s", msg);
    write_log(line);
}
"""),
    ("decode_rle", "imgtool", "lib/rle.c", 15, "CVE-2099-10008", "CWE-787", None,
     """static int decode_rle(uint8_t *out, int out_size, const uint8_t *in, int in_size)
{
    int pos = 0;
    int i = 0;

    while (i + 1 < in_size) {
        int run = in[i];
        uint8_t val = in[i + 1];
        memset(out + pos, val, run);
        pos += run;
        i += 2;
    }
    return pos;
}
""",
     """static int decode_rle(uint8_t *out, int out_size, const uint8_t *in, int in_size)
{
    int pos = 0;
    int i = 0;

    while (i + 1 < in_size) {
        int run = in[i];
        uint8_t val = in[i + 1];
        if (run > out_size - pos)
            return -1;
        memset(out + pos, val, run);
        pos += run;
        i += 2;
    }
    return pos;
}
"""),
    ("set_option", "confparse", "src/options.c", 132, "CVE-2099-10009", "CWE-120", None,
     """int set_option(struct config *cfg, const char *name, const char *value)
{
    struct option *opt = find_option(cfg, name);

    if (!opt)
        return -1;
    strcpy(opt->value, value);
    opt->is_set = 1;
    return 0;
}
""",
     """int set_option(struct config *cfg, const char *name, const char *value)
{
    struct option *opt = find_option(cfg, name);

    if (!opt)
        return -1;
    strncpy(opt->value, value, sizeof(opt->value) - 1);
    opt->value[sizeof(opt->value) - 1] = '\\0';
    opt->is_set = 1;
    return 0;
}
"""),
    ("resize_buffer", "strbuf", "src/buffer.c", 88, "CVE-2099-10010", "CWE-190",
     "An integer overflow in resize_buffer in strbuf leads to an undersized allocation and heap overflow.",
     """int resize_buffer(struct buffer *b, size_t extra)
{
    size_t need = b->len + extra;
    char *tmp;

    if (need <= b->cap)
        return 0;
    tmp = realloc(b->data, need * 2);
    if (!tmp)
        return -1;
    b->data = tmp;
    b->cap = need * 2;
    return 0;
}
""",
     """int resize_buffer(struct buffer *b, size_t extra)
{
    size_t need;
    char *tmp;

    if (extra > SIZE_MAX / 2 - b->len)
        return -1;
    need = b->len + extra;
    if (need <= b->cap)
        return 0;
    tmp = realloc(b->data, need * 2);
    if (!tmp)
        return -1;
    b->data = tmp;
    b->cap = need * 2;
    return 0;
}
"""),
    ("read_chunks", "mediaparse", "src/chunks.c", 402, "CVE-2099-10011", "CWE-835", None,
     """static int read_chunks(struct reader *r)
{
    int offset = 0;
    int size;

    while (offset < r->length) {
        size = read_u32(r, offset);
        offset += size;
    }
    return 0;
}
""",
     """static int read_chunks(struct reader *r)
{
    int offset = 0;
    int size;

    while (offset < r->length) {
        size = read_u32(r, offset);
        if (size < 0)
            return -1;
        offset += size + 4;
    }
    return 0;
}
"""),
    ("handle_request", "webd", "server/request.c", 250, "CVE-2099-10012", "CWE-415",
     "handle_request in webd frees the request body on error while the caller frees it again, a double free.",
     """int handle_request(struct request *req)
{
    char *body = req->body;
    int ret = process_body(body);

    if (ret < 0) {
        free(body);
        return ret;
    }
    free(body);
    req->body = NULL;
    return 0;
}
""",
     """int handle_request(struct request *req)
{
    char *body = req->body;
    int ret = process_body(body);

    if (ret < 0) {
        return ret;
    }
    free(body);
    req->body = NULL;
    return 0;
}
"""),
    ("get_index", "mathlib", "src/table.c", 31, None, "CWE-129", None,
     """int get_index(const int *table, int table_len, int idx)
{
    if (idx >= table_len)
        return -1;
    return table[idx];
}
""",
     """int get_index(const int *table, int table_len, int idx)
{
    if (idx < 0 || idx >= table_len)
        return -1;
    return table[idx];
}
"""),
    ("parse_tlv", "netkit", "src/tlv.c", 66, "CVE-2099-10014", "CWE-125", None,
     """int parse_tlv(const uint8_t *data, int len, struct tlv *out)
{
    int type;
    int vlen;

    if (len < 2)
        return -1;
    type = data[0];
    vlen = data[1];
    out->type = type;
    out->len = vlen;
    memcpy(out->value, data + 2, vlen);
    return vlen + 2;
}
""",
     """int parse_tlv(const uint8_t *data, int len, struct tlv *out)
{
    int type;
    int vlen;

    if (len < 2)
        return -1;
    type = data[0];
    vlen = data[1];
    out->type = type;
    out->len = vlen;
    memcpy(out->value, data + 2, FFMIN(vlen, len - 2));
    return vlen + 2;
}
"""),
    ("string_dup", "strbuf", "src/str.c", 12, None, "CWE-131", None,
     """char *string_dup(const char *s)
{
    size_t n = strlen(s);
    char *copy = malloc(n);

    memcpy(copy, s, n + 1);
    return copy;
}
""",
     """char *string_dup(const char *s)
{
    size_t n = strlen(s);
    char *copy = malloc(n + 1);

    if (!copy)
        return NULL;
    memcpy(copy, s, n + 1);
    return copy;
}
"""),
]

# Extra hunk in a second file for the multi-file patch case.
EXTRA_FILE_HUNK = {
    "set_option": ("include/options.h", """#define OPTION_MAX 64
struct option {
    char value[OPTION_MAX];
    int is_set;
};
""", """#define OPTION_MAX 64
struct option {
    char value[OPTION_MAX];
    int is_set;
    int flags;
};
"""),
}

BENIGN = [
    ("sum_array", """int sum_array(const int *values, int count)
{
    int total = 0;
    int i;

    for (i = 0; i < count; i++)
        total += values[i];
    return total;
}
"""),
    ("clamp_int", """int clamp_int(int v, int lo, int hi)
{
    if (v < lo)
        return lo;
    if (v > hi)
        return hi;
    return v;
}
"""),
    ("count_words", """int count_words(const char *text)
{
    int words = 0;
    int in_word = 0;

    while (*text) {
        if (*text == ' ' || *text == '\\n') {
            in_word = 0;
        } else if (!in_word) {
            in_word = 1;
            words++;
        }
        text++;
    }
    return words;
}
"""),
    ("list_length", """int list_length(const struct node *head)
{
    int n = 0;

    while (head) {
        n++;
        head = head->next;
    }
    return n;
}
"""),
    ("find_max", """int find_max(const int *values, int count)
{
    int best = values[0];
    int i;

    for (i = 1; i < count; i++) {
        if (values[i] > best)
            best = values[i];
    }
    return best;
}
"""),
    ("reverse_string", """void reverse_string(char *s)
{
    size_t len = strlen(s);
    size_t i;

    for (i = 0; i < len / 2; i++) {
        char tmp = s[i];
        s[i] = s[len - 1 - i];
        s[len - 1 - i] = tmp;
    }
}
"""),
    ("checksum8", """uint8_t checksum8(const uint8_t *data, size_t len)
{
    uint8_t sum = 0;
    size_t i;

    for (i = 0; i < len; i++)
        sum ^= data[i];
    return sum;
}
"""),
    ("safe_copy", """int safe_copy(char *dst, size_t dst_size, const char *src)
{
    size_t n = strlen(src);

    if (n >= dst_size)
        return -1;
    memcpy(dst, src, n + 1);
    return 0;
}
"""),
    ("parse_digit", """int parse_digit(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    return -1;
}
"""),
    ("init_context", """void init_context(struct context *ctx, int flags)
{
    memset(ctx, 0, sizeof(*ctx));
    ctx->flags = flags;
    ctx->state = STATE_IDLE;
}
"""),
    ("queue_push", """int queue_push(struct queue *q, int item)
{
    if (q->count >= q->capacity)
        return -1;
    q->items[q->tail] = item;
    q->tail = (q->tail + 1) % q->capacity;
    q->count++;
    return 0;
}
"""),
    ("hex_value", """int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}
"""),
    ("is_power_of_two", """int is_power_of_two(unsigned int x)
{
    return x != 0 && (x & (x - 1)) == 0;
}
"""),
    ("swap_bytes", """uint16_t swap_bytes(uint16_t v)
{
    uint16_t hi = v >> 8;
    uint16_t lo = v & 0xff;

    return (uint16_t)((lo << 8) | hi);
}
"""),
    ("count_bits", """int count_bits(unsigned int x)
{
    int bits = 0;

    while (x) {
        bits += x & 1;
        x >>= 1;
    }
    return bits;
}
"""),
    ("str_starts_with", """int str_starts_with(const char *s, const char *prefix)
{
    size_t n = strlen(prefix);

    return strncmp(s, prefix, n) == 0;
}
"""),
    ("average_u8", """int average_u8(const uint8_t *samples, int count)
{
    long acc = 0;
    int i;

    if (count <= 0)
        return 0;
    for (i = 0; i < count; i++)
        acc += samples[i];
    return (int)(acc / count);
}
"""),
    ("gcd", """unsigned int gcd(unsigned int a, unsigned int b)
{
    while (b != 0) {
        unsigned int t = b;
        b = a % b;
        a = t;
    }
    return a;
}
"""),
    ("table_fill", """void table_fill(int *table, int rows, int cols, int value)
{
    int r;
    int c;

    for (r = 0; r < rows; r++) {
        for (c = 0; c < cols; c++)
            table[r * cols + c] = value;
    }
}
"""),
    ("trim_right", """void trim_right(char *s)
{
    size_t len = strlen(s);

    while (len > 0 && (s[len - 1] == ' ' || s[len - 1] == '\\t'))
        s[--len] = '\\0';
}
"""),
]

# Formatting-only variants that normalize to an existing benign function.
NEAR_DUPLICATES = {
    "sum_array": lambda code: code.replace("    ", "\t").replace("\n\n", "\n\n\n"),
    "find_max": lambda code: "\n" + code.replace("    ", "  ") + "\n",
    "hex_value": lambda code: code.replace("\n", "\n\n").replace("    ", "        "),
}

CVE_2018_7751 = ("The svg_probe function in libavformat/img2dec.c in FFmpeg through 3.4.2 allows remote "
                 "attackers to cause a denial of service (Infinite Loop) via a crafted XML file.")

STORE_ONLY_DESCRIPTIONS = {
    "CVE-2018-7751": CVE_2018_7751,
    "CVE-2099-10003": "parse_header in imgtool compares the computed table size against the whole buffer length "
                      "instead of the bytes after the count field, leading to an out-of-bounds read.",
    "CVE-2099-10006": "lookup_entry in kvstore dereferences the result of table_find without checking for NULL.",
    "CVE-2099-10008": "decode_rle in imgtool writes runs without checking the remaining output space, "
                      "allowing a heap buffer overflow with crafted images.",
    "CVE-2099-10009": "set_option in confparse copies option values with strcpy into a fixed-size buffer.",
    "CVE-2099-10011": "read_chunks in mediaparse loops forever when a chunk declares a size of zero.",
    "CVE-2099-10014": "parse_tlv in netkit trusts the declared value length and reads past the end of the input.",
}

STEP1_GOLDEN = ("1: Buffer Overrun: The function relies on the behavior of ff_subtitles_next_line(b). If this "
                "function fails to correctly handle the end of the buffer, it could result in b pointing beyond "
                "the end, causing a buffer overrun.")
SYNTHESIS_GOLDEN = ("1: The vulnerability in svg_probe arises from how b is incremented in line 9. This, in "
                    "combination with the control flow in line 8 and the dataflow/boundary check in line 14, can "
                    "lead to an infinite loop under certain conditions. This scenario highlights the importance of "
                    "meticulously managing pointer arithmetic and loop conditions in low-level programming, "
                    "particularly in functions processing external inputs.")


def make_patch(path, offset, before, after, extra=None):
    lines = []
    files = [(path, offset, before, after)]
    if extra:
        files.append((extra[0], 10, extra[1], extra[2]))
    for fpath, off, a, b in files:
        diff = list(difflib.unified_diff(a.splitlines(True), b.splitlines(True),
                                         fromfile="a/" + fpath, tofile="b/" + fpath, n=3))
        lines.append("diff --git a/%s b/%s\n" % (fpath, fpath))
        lines.append("index 1a2b3c4..5d6e7f8 100644\n")
        for line in diff:
            m = re.match(r"^@@ -(\d+)(,\d+)? \+(\d+)(,\d+)? @@", line)
            if m:
                old = int(m.group(1)) + off
                new = int(m.group(3)) + off
                line = "@@ -%d%s +%d%s @@\n" % (old, m.group(2) or "", new, m.group(4) or "")
            elif line.startswith("---") or line.startswith("+++"):
                line = line.rstrip("\n") + "\n"
            lines.append(line)
    return "".join(lines)


def words(code):
    return re.findall(r"[A-Za-z_][A-Za-z0-9_]*", code)


def fit_scorer(samples):
    """Small L2-regularized logistic regression over word counts."""
    vocab = sorted({w for code, _ in samples for w in words(code)})
    index = {w: i for i, w in enumerate(vocab)}
    rows = []
    for code, y in samples:
        x = [0.0] * len(vocab)
        for w in words(code):
            x[index[w]] += 1.0
        rows.append((x, y))
    weights = [0.0] * len(vocab)
    bias = 0.0
    lr, l2 = 0.05, 0.08
    for _ in range(1500):
        gw = [0.0] * len(vocab)
        gb = 0.0
        for x, y in rows:
            z = bias + sum(wi * xi for wi, xi in zip(weights, x) if xi)
            p = 1.0 / (1.0 + math.exp(-z))
            for i, xi in enumerate(x):
                if xi:
                    gw[i] += (p - y) * xi
            gb += p - y
        n = len(rows)
        weights = [w - lr * (g / n + l2 * w) for w, g in zip(weights, gw)]
        bias -= lr * gb / n
    kept = {w: round(v, 3) for w, v in zip(vocab, weights) if abs(v) >= 0.02}
    return round(bias, 3), kept


def main():
    rows = []
    cve_map = {}
    mistakes_step1 = {"read_chunks": "0: The loop advances by the chunk size each time and stops at the end of the "
                                     "reader, so no vulnerability is apparent.",
                      "swap_bytes": "1: The shifts may lose data when the value is wider than expected."}
    mistaken_synthesis = {"format_log"}
    rules = []

    for name, project, path, off, cve, cwe, desc, before, after in VULNERABLE:
        row = {"func": before, "target": 1, "project": project, "commit_id": "c0ffee%04d" % (len(rows) + 1),
               "fix_patch": make_patch(path, off, before, after, EXTRA_FILE_HUNK.get(name))}
        if cve:
            row["cve"] = cve
            if desc:
                row["cve_desc"] = desc
            else:
                cve_map[cve] = STORE_ONLY_DESCRIPTIONS[cve]
        row["cwe"] = cwe
        rows.append(row)

    benign_codes = {}
    for name, code in BENIGN:
        benign_codes[name] = code
        rows.append({"func": code, "target": 0, "project": "utils", "commit_id": None})

    for name, fn in NEAR_DUPLICATES.items():
        rows.append({"func": fn(benign_codes[name]), "target": 0, "project": "utils-fork"})

    # interleave deterministically so classes are mixed in file order
    ordered = []
    vul = [r for r in rows if r["target"] == 1]
    ben = [r for r in rows if r["target"] == 0]
    while vul or ben:
        if ben:
            ordered.append(json.dumps(ben.pop(0)))
        if vul:
            ordered.append(json.dumps(vul.pop(0)))
    ordered.insert(7, '{"func": "int broken(void) { return 0; }", "target": 1')  # truncated JSON
    ordered.insert(23, json.dumps({"target": 0, "project": "utils", "note": "row without code"}))
    assert len(ordered) == 40, len(ordered)
    (HERE / "corpus.jsonl").write_text("\n".join(ordered) + "\n")
    (HERE / "cve.json").write_text(json.dumps(cve_map, indent=2, sort_keys=True) + "\n")

    # CoT-SV rules, most specific first.
    rules.append({"contains": ["svg_probe("], "last_contains": ["Combine the analysis above"],
                  "response": SYNTHESIS_GOLDEN})
    rules.append({"last_contains": ["As a vulnerability detection system", "svg_probe("], "response": STEP1_GOLDEN})
    for name in sorted(mistaken_synthesis):
        rules.append({"contains": [name + "("], "last_contains": ["Combine the analysis above"],
                      "response": "0: After reviewing the evidence, the message is always bounded by the buffer size, "
                                  "so the function is not vulnerable."})
    for name, text in sorted(mistakes_step1.items()):
        rules.append({"last_contains": ["As a vulnerability detection system", name + "("], "response": text})
    for name, *_ in VULNERABLE:
        if name in ("svg_probe",) or name in mistakes_step1:
            continue
        rules.append({"last_contains": ["As a vulnerability detection system", name + "("],
                      "response": "1: %s handles attacker-influenced sizes or pointers without a sufficient check, "
                                  "which can corrupt or expose memory." % name})
    for name, _ in BENIGN:
        if name in mistakes_step1:
            continue
        rules.append({"last_contains": ["As a vulnerability detection system", name + "("],
                      "response": "0: %s validates its inputs and stays within the bounds of its buffers; no "
                                  "vulnerability is present." % name})
    rules.append({"last_contains": ["Please double-check the answer and analyze its correctness."],
                  "response": "1: After double-checking against this evidence, the function is vulnerable; the "
                              "evidence points at the same flawed operation."})
    rules.append({"last_contains": ["Combine the analysis above"],
                  "response": "1: The vulnerability lies in the listed vulnerability lines, which act on values that "
                              "the context statements define and guard; without the missing check the data flow "
                              "reaches memory operations with unchecked sizes."})

    samples = [(r[7], 1) for r in VULNERABLE] + [(code, 0) for _, code in BENIGN]
    bias, weights = fit_scorer(samples)
    fixture = {
        "rules": rules,
        "scorer": {"last_contains": ["Detect whether the following code contains vulnerabilities."],
                   "bias": bias, "weights": weights},
        "default_response": "0",
    }
    (HERE / "mock_endpoint.json").write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")

    correct = 0
    for code, y in samples:
        z = bias + sum(weights.get(w, 0.0) for w in words(code))
        correct += (z >= 0) == (y == 1)
    print("scorer accuracy on the unique functions: %d/%d" % (correct, len(samples)))


if __name__ == "__main__":
    main()
