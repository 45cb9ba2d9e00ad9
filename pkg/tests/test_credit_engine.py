import io
import math
import unittest

import numpy as np

from app.credit_engine import (
    SetCredit,
    absorb,
    action_influence,
    direct_credits,
    direct_weight,
    dump_credits,
    marginal_gain,
    scan_log,
    sigma,
    sigma_from_scratch,
)
from app.errors import ContractViolation, DomainError
from app.event_log import EventLog, EventRecord
from app.model_learner import LearnedParams, learn
from app.social_graph import SocialGraph, propagation_graph
from tests.fixtures import canonical_instance, oracle_set_credit, oracle_sigma, random_instance

TOL = 1e-9

# direct credit user 1 gives user 3 in the canonical example: effective delays 2.4 and 3, taus 5 and 3
GAMMA_13 = math.exp(-0.48) / (math.exp(-0.48) + math.exp(-1.0))


class TestDirectCredit(unittest.TestCase):

    def test_canonical_receiver_three(self):
        credits = direct_credits([2.4, 3.0], [5.0, 3.0])
        self.assertAlmostEqual(credits[0], GAMMA_13, delta=TOL)
        self.assertAlmostEqual(credits[1], 1.0 - GAMMA_13, delta=TOL)
        self.assertAlmostEqual(credits.sum(), 1.0, delta=TOL)
        # the rounded hand values
        self.assertAlmostEqual(credits[0], 0.62715, places=4)
        self.assertAlmostEqual(credits[1], 0.37285, places=4)

    def test_matches_normalized_exponentials(self):
        raw = [direct_weight(2.4, 5.0), direct_weight(3.0, 3.0)]
        self.assertAlmostEqual(raw[0], math.exp(-0.48), delta=TOL)
        expected = np.asarray(raw) / sum(raw)
        np.testing.assert_allclose(direct_credits([2.4, 3.0], [5.0, 3.0]), expected, atol=TOL)

    def test_single_neighbour_gets_everything(self):
        self.assertEqual(direct_credits([100.0], [0.5])[0], 1.0)

    def test_underflowing_exponentials_still_normalize(self):
        credits = direct_credits([1e6, 2e6], [1.0, 1.0])
        self.assertTrue(np.all(np.isfinite(credits)))
        self.assertAlmostEqual(credits.sum(), 1.0, delta=TOL)

    def test_domain(self):
        with self.assertRaises(DomainError):
            direct_credits([], [])
        with self.assertRaises(DomainError):
            direct_credits([1.0], [0.0])
        with self.assertRaises(DomainError):
            direct_weight(0.0, 1.0)


class TestCanonicalCredits(unittest.TestCase):

    def setUp(self):
        self.inst = canonical_instance()
        self.table = self.inst.table

    def test_total_credit_from_root(self):
        self.assertAlmostEqual(self.table.entry(0, 1, 3), 1.0, delta=TOL)
        self.assertAlmostEqual(self.table.entry(0, 1, 2), 1.0, delta=TOL)
        self.assertAlmostEqual(self.table.entry(0, 2, 3), 1.0 - GAMMA_13, delta=TOL)
        self.assertEqual(self.table.entry(0, 3, 1), 0.0)
        self.assertEqual(self.table.entry(0, 2, 2), 1.0)

    def test_direct_credit_block(self):
        block = self.table.blocks[0]
        self.assertEqual(block.nodes, (1, 2, 3))
        self.assertAlmostEqual(block.direct(1, 3), GAMMA_13, delta=TOL)
        self.assertAlmostEqual(block.direct(2, 3), 1.0 - GAMMA_13, delta=TOL)
        self.assertAlmostEqual(block.direct(1, 2), 1.0, delta=TOL)
        self.assertEqual(block.direct(3, 1), 0.0)

    def test_only_positive_credits_are_stored(self):
        # (1,1) (1,2) (1,3) (2,2) (2,3) (3,3): nothing flows backwards in time
        self.assertEqual(self.table.stored(), 6)
        self.assertEqual(len(list(self.table.nonzero(0))), 6)

    def test_sigma_of_root_and_sink(self):
        self.assertAlmostEqual(sigma_from_scratch(self.table, [1]), 3.0, delta=TOL)
        self.assertAlmostEqual(sigma_from_scratch(self.table, [3]), 1.0, delta=TOL)
        self.assertEqual(sigma_from_scratch(self.table, []), 0.0)

    def test_absorb_root(self):
        sc = SetCredit()
        uc = self.table.fork()
        self.assertAlmostEqual(marginal_gain(1, uc, sc), 3.0, delta=TOL)
        absorb(1, uc, sc)
        np.testing.assert_allclose(sc.sc[0], [1.0, 1.0, 1.0], atol=TOL)
        self.assertAlmostEqual(sigma(uc, sc, [1]), 3.0, delta=TOL)
        self.assertAlmostEqual(marginal_gain(2, uc, sc), 0.0, delta=TOL)
        self.assertAlmostEqual(marginal_gain(3, uc, sc), 0.0, delta=TOL)

    def test_absorb_twice(self):
        sc = SetCredit()
        uc = self.table.fork()
        absorb(1, uc, sc)
        with self.assertRaises(ContractViolation):
            absorb(1, uc, sc)
        with self.assertRaises(ContractViolation):
            marginal_gain(1, uc, sc)

    def test_sigma_with_foreign_seed_list(self):
        sc = SetCredit()
        with self.assertRaises(ContractViolation):
            sigma(self.table, sc, [2])

    def test_fork_isolated_from_parent(self):
        fork = self.table.fork()
        absorb(2, fork, SetCredit())
        self.assertAlmostEqual(self.table.entry(0, 1, 3), 1.0, delta=TOL)
        self.assertNotAlmostEqual(fork.entry(0, 1, 3), 1.0, places=3)

    def test_action_influence_of_initiators(self):
        self.assertAlmostEqual(action_influence(self.table, [1])[0], 3.0, delta=TOL)
        self.assertEqual(action_influence(self.table, [1], [5]), {5: 0.0})

    def test_dump(self):
        buf = io.StringIO()
        dump_credits(self.table, buf)
        lines = buf.getvalue().splitlines()
        self.assertIn("0 1 1 1", lines)
        fields = {tuple(line.split()[:3]): float(line.split()[3]) for line in lines}
        self.assertAlmostEqual(fields[("0", "1", "3")], 1.0, delta=TOL)
        self.assertNotIn(("0", "3", "1"), fields)


class TestScanLog(unittest.TestCase):

    def test_weights_use_distinct_actions(self):
        graph = SocialGraph([(1, 2)])
        log = EventLog([EventRecord(1, 0, 0), EventRecord(2, 0, 1), EventRecord(1, 1, 0), EventRecord(2, 1, 5)])
        table = scan_log(graph, learn(graph, log), log)
        self.assertEqual(table.distinct_actions[1], 2)
        # each action contributes 1/2 for user 1 and 1/2 for user 2
        self.assertAlmostEqual(sigma_from_scratch(table, [1]), 2.0, delta=TOL)

    def test_unseen_pair_uses_fallback_tau(self):
        graph = SocialGraph([(1, 2), (1, 3)])
        log = EventLog([EventRecord(1, 0, 0), EventRecord(2, 0, 3), EventRecord(3, 0, 4)])
        params = LearnedParams(tau={(1, 2): 4.0})
        table = scan_log(graph, params, log)
        self.assertEqual(table.fallback_count, 1)
        self.assertAlmostEqual(table.entry(0, 1, 3), 1.0, delta=TOL)

    def test_thread_count_does_not_change_credits(self):
        inst = random_instance(11)
        pooled = scan_log(inst.graph, inst.params, inst.log, threads=4)
        for action in inst.table.blocks:
            self.assertEqual(list(inst.table.nonzero(action)), list(pooled.nonzero(action)))

    def test_credit_flows_forward_and_is_bounded(self):
        for seed in range(20):
            table = random_instance(seed).table
            for action, block in table.blocks.items():
                for source, receiver, credit in table.nonzero(action):
                    self.assertLessEqual(block.index[source], block.index[receiver])
                    self.assertLessEqual(credit, 1.0 + TOL)
                    self.assertGreater(credit, 0.0)
                for user in block.nodes:
                    self.assertEqual(table.entry(action, user, user), 1.0)

    def test_stored_entries_match_oracle_support(self):
        for seed in range(20):
            inst = random_instance(seed)
            expected = 0
            for user in inst.table.users:
                for action, credit in oracle_set_credit(inst, [user]).items():
                    expected += sum(1 for value in credit.values() if value > 0.0)
            self.assertEqual(inst.table.stored(), expected, msg=f"seed {seed}")


class TestIncrementalEquivalence(unittest.TestCase):

    def test_against_recursive_oracle(self):
        for seed in range(200):
            inst = random_instance(seed)
            table = inst.table
            rng = np.random.Generator(np.random.Philox(seed + 1000))
            users = sorted(table.users)
            order = [users[i] for i in rng.permutation(len(users))][:6]
            uc, sc = table.fork(), SetCredit()
            chosen = []
            for x in order:
                base = oracle_sigma(inst, chosen)
                for y in [users[i] for i in rng.permutation(len(users))[:3]]:
                    if y in sc:
                        continue
                    expected = oracle_sigma(inst, chosen + [y]) - base
                    self.assertAlmostEqual(marginal_gain(y, uc, sc), expected, delta=TOL, msg=f"seed {seed}")
                absorb(x, uc, sc)
                chosen.append(x)

                oracle = oracle_set_credit(inst, chosen)
                for action, block in table.blocks.items():
                    credits = sc.sc.get(action, np.zeros(len(block.nodes)))
                    expected = [oracle[action][u] for u in block.nodes]
                    np.testing.assert_allclose(credits, expected, atol=TOL, err_msg=f"seed {seed}")
                self.assertAlmostEqual(sigma(uc, sc), oracle_sigma(inst, chosen), delta=TOL)
                self.assertAlmostEqual(sigma_from_scratch(table, chosen), oracle_sigma(inst, chosen), delta=TOL)

    def test_absorb_order_independent(self):
        for seed in range(50):
            table = random_instance(seed).table
            users = sorted(table.users)
            if len(users) < 2:
                continue
            rng = np.random.Generator(np.random.Philox(seed + 2000))
            x, y = (users[i] for i in rng.choice(len(users), size=2, replace=False))

            xy_uc, xy_sc = table.fork(), SetCredit()
            absorb(x, xy_uc, xy_sc)
            absorb(y, xy_uc, xy_sc)
            yx_uc, yx_sc = table.fork(), SetCredit()
            absorb(y, yx_uc, yx_sc)
            absorb(x, yx_uc, yx_sc)

            self.assertEqual(set(xy_sc.sc), set(yx_sc.sc))
            for action in xy_sc.sc:
                np.testing.assert_allclose(xy_sc.sc[action], yx_sc.sc[action], atol=TOL, err_msg=f"seed {seed}")
            for action in table.blocks:
                np.testing.assert_allclose(xy_uc.uc[action], yx_uc.uc[action], atol=TOL, err_msg=f"seed {seed}")
            self.assertAlmostEqual(sigma(xy_uc, xy_sc), sigma(yx_uc, yx_sc), delta=TOL)
            for z in users:
                if z not in (x, y):
                    self.assertAlmostEqual(marginal_gain(z, xy_uc, xy_sc), marginal_gain(z, yx_uc, yx_sc), delta=TOL)


class TestInfluenceBounds(unittest.TestCase):

    def test_sigma_bounded_by_population(self):
        for seed in range(50):
            inst = random_instance(seed)
            population = len(inst.table.users)
            rng = np.random.Generator(np.random.Philox(seed))
            users = sorted(inst.table.users)
            for size in (1, 3, len(users)):
                seeds = [users[i] for i in rng.permutation(len(users))[:size]]
                self.assertLessEqual(sigma_from_scratch(inst.table, seeds), population + TOL)

    def test_initiators_explain_every_performer(self):
        for seed in range(50):
            inst = random_instance(seed)
            for action in inst.log.actions:
                pg = propagation_graph(inst.graph, inst.log, action)
                value = action_influence(inst.table, pg.initiators, [action])[action]
                self.assertAlmostEqual(value, len(pg.nodes), delta=TOL)


class TestSubmodularity(unittest.TestCase):

    def test_monotone_and_diminishing_returns(self):
        triples = 0
        seed = 0
        while triples < 10000:
            table = random_instance(seed, max_users=12).table
            rng = np.random.Generator(np.random.Philox(seed + 7))
            seed += 1
            users = sorted(table.users)
            if len(users) < 2:
                continue
            for _ in range(250):
                perm = [users[i] for i in rng.permutation(len(users))]
                x, rest = perm[0], perm[1:]
                big = rest[:int(rng.integers(0, len(rest) + 1))]
                small = big[:int(rng.integers(0, len(big) + 1))]
                gain_small = sigma_from_scratch(table, small + [x]) - sigma_from_scratch(table, small)
                gain_big = sigma_from_scratch(table, big + [x]) - sigma_from_scratch(table, big)
                self.assertGreaterEqual(gain_big, -TOL)
                self.assertGreaterEqual(gain_small + TOL, gain_big)
                triples += 1


if __name__ == '__main__':
    unittest.main()
