import io
import unittest

from app.errors import DomainError, ParseError, SplitError
from app.event_log import (
    EventLog,
    EventRecord,
    dedupe_first_occurrence,
    parse_log,
    parse_natural,
    repetition_rate,
    repetition_summary,
    split_by_action,
    top_actions,
    write_log,
)
from tests.fixtures import canonical_log, canonical_text


def _log(*triples):
    return EventLog(EventRecord(u, a, t) for u, a, t in triples)


class TestParseLog(unittest.TestCase):

    def test_canonical(self):
        _, text = canonical_text()
        log = parse_log(io.StringIO(text))
        self.assertEqual(log, canonical_log())
        self.assertEqual(len(log), 4)
        self.assertEqual(log.users, {1, 2, 3})

    def test_blank_and_comment_lines_skipped(self):
        log = parse_log(io.StringIO("\n# header\n5 1 10\n\n"))
        self.assertEqual(len(log), 1)

    def test_duplicate_records_collapse(self):
        log = parse_log(io.StringIO("1 0 5\n1 0 5\n"))
        self.assertEqual(len(log), 1)
        self.assertEqual(log.count(1, 0), 1)

    def test_wrong_field_count_reports_line(self):
        with self.assertRaises(ParseError) as cm:
            parse_log(io.StringIO("1 0 5\n1 0\n"))
        self.assertEqual(cm.exception.line, 2)
        self.assertIn("line 2", str(cm.exception))

    def test_negative_time(self):
        with self.assertRaises(ParseError):
            parse_log(io.StringIO("1 0 -3\n"))

    def test_non_integer_field(self):
        with self.assertRaises(ParseError):
            parse_log(io.StringIO("1 x 3\n"))

    def test_only_plain_ascii_digits(self):
        for text in ("1_000 0 3\n", "+5 0 3\n", "1 0 \u0661\n", "1 \u00b2 3\n", "1 0 3.0\n"):
            with self.assertRaises(ParseError, msg=repr(text)) as cm:
                parse_log(io.StringIO(text))
            self.assertEqual(cm.exception.line, 1)

    def test_parse_natural(self):
        self.assertEqual(parse_natural("0042"), 42)
        for field in ("", "-1", " 1", "1_0", "\uff11"):
            with self.assertRaises(ValueError):
                parse_natural(field)

    def test_write_then_parse(self):
        buf = io.StringIO()
        write_log(canonical_log(), buf)
        self.assertEqual(parse_log(io.StringIO(buf.getvalue())), canonical_log())


class TestAccessors(unittest.TestCase):

    def setUp(self):
        self.log = canonical_log()

    def test_counts_and_times(self):
        self.assertEqual(self.log.count(1, 0), 2)
        self.assertEqual(self.log.count(2, 0), 1)
        self.assertEqual(self.log.count(9, 0), 0)
        self.assertEqual(self.log.times(1, 0), (0, 2))
        self.assertEqual(self.log.first_time(3, 0), 6)

    def test_first_time_of_absent_pair(self):
        with self.assertRaises(DomainError):
            self.log.first_time(9, 0)

    def test_records_sorted_by_time_within_action(self):
        log = _log((2, 0, 5), (1, 0, 5), (3, 0, 1), (1, 1, 0))
        self.assertEqual([(r.user, r.time) for r in log.records_for(0)], [(3, 1), (1, 5), (2, 5)])

    def test_performers_and_actions_of(self):
        log = _log((1, 0, 0), (1, 1, 0), (2, 1, 3))
        self.assertEqual(log.performers(1), {1, 2})
        self.assertEqual(log.actions_of(1), {0, 1})


class TestRepetition(unittest.TestCase):

    def test_canonical_rate(self):
        self.assertAlmostEqual(repetition_rate(canonical_log(), 0), 0.25, places=12)

    def test_no_repeats(self):
        log = _log((1, 0, 0), (2, 0, 1))
        self.assertEqual(repetition_rate(log, 0), 0.0)

    def test_unknown_action(self):
        with self.assertRaises(DomainError):
            repetition_rate(canonical_log(), 7)

    def test_top_actions_ties_by_id(self):
        log = _log((1, 3, 0), (2, 3, 1), (1, 1, 0), (2, 1, 1), (1, 2, 0))
        self.assertEqual(top_actions(log, 2), [1, 3])
        self.assertEqual(top_actions(log, 10), [1, 3, 2])

    def test_summary(self):
        log = _log((1, 0, 0), (1, 0, 1), (1, 1, 0), (2, 1, 0))
        self.assertAlmostEqual(repetition_summary(log, 0.1), 0.5)
        self.assertEqual(repetition_summary(EventLog()), 0.0)


class TestSplit(unittest.TestCase):

    def setUp(self):
        self.log = EventLog(EventRecord(u, a, u + a) for a in range(10) for u in range(4))

    def test_partition_by_action(self):
        train, test = split_by_action(self.log, 0.2, 42)
        self.assertEqual(len(test.actions), 2)
        self.assertFalse(train.actions & test.actions)
        self.assertEqual(train.actions | test.actions, self.log.actions)
        self.assertEqual(len(train) + len(test), len(self.log))

    def test_deterministic(self):
        self.assertEqual(split_by_action(self.log, 0.3, 7), split_by_action(self.log, 0.3, 7))

    def test_test_count_rounds_half_up(self):
        log = EventLog(EventRecord(0, a, 0) for a in range(5))
        _, test = split_by_action(log, 0.5, 3)
        self.assertEqual(len(test.actions), 3)
        _, test = split_by_action(self.log, 0.25, 3)
        self.assertEqual(len(test.actions), 3)

    def test_both_sides_nonempty(self):
        train, test = split_by_action(self.log, 0.01, 1)
        self.assertEqual(len(test.actions), 1)
        train, test = split_by_action(self.log, 0.99, 1)
        self.assertEqual(len(train.actions), 1)

    def test_single_action(self):
        with self.assertRaises(SplitError):
            split_by_action(canonical_log(), 0.5, 0)

    def test_fraction_out_of_range(self):
        with self.assertRaises(DomainError):
            split_by_action(self.log, 1.0, 0)


class TestDedupe(unittest.TestCase):

    def test_keeps_first_occurrence(self):
        deduped = dedupe_first_occurrence(canonical_log())
        self.assertEqual(len(deduped), 3)
        self.assertEqual(deduped.times(1, 0), (0,))

    def test_repeat_free_log_unchanged(self):
        log = _log((1, 0, 0), (2, 0, 4), (2, 1, 1))
        self.assertEqual(dedupe_first_occurrence(log), log)


if __name__ == '__main__':
    unittest.main()
