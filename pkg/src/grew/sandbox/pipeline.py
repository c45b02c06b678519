"""End-to-end sandbox experiments: data, calibration, serving, metrics, attack."""
from functools import cached_property

import numpy as np

from grew.partition import derive_projection, semantic_coordinates
from grew.sandbox.data import gen_catalog, gen_interactions
from grew.sandbox.metrics import agreement_at_k, green_hit_rate, ndcg_at_k, recall_at_k
from grew.sandbox.models import (TeacherScorer, Watermark, calibrate, initial_controller,
                                 recommend_all, serve_topk, train_student)
from grew.verifier import RecommendationList, verify

MASK64 = (1 << 64) - 1


def build_data(cfg):
    catalog = gen_catalog(cfg.n_items, cfg.d, cfg.n_clusters, cfg.spread, rng_seed=cfg.seed,
                          center_scale=cfg.center_scale,
                          popularity_sigma=cfg.popularity_sigma)
    log = gen_interactions(catalog, cfg.n_users, cfg.seq_len, cfg.p_stay,
                           rng_seed=(cfg.seed + 1) & MASK64, sharpness=cfg.walk_sharpness,
                           rho=cfg.rho, pop_weight=cfg.lambda_pop)
    return catalog, log


class Experiment:
    """One sandbox world under one secret key.

    Calibration uses the second-to-last item of every user as validation
    target; serving and evaluation use the last item (leave-one-out).
    """

    def __init__(self, cfg, key, catalog=None, log=None):
        self.cfg = cfg
        self.key = key
        if catalog is None or log is None:
            catalog, log = build_data(cfg)
        self.catalog = catalog
        self.log = log
        self.teacher = TeacherScorer.from_catalog(catalog, rho=cfg.rho, lambda_pop=cfg.lambda_pop)
        self.pcfg = cfg.partition()
        self.icfg = cfg.injector()
        self.calib_histories = log.histories(holdout=2)
        self.test_histories = log.histories(holdout=1)
        self.targets = log.targets(holdout=1)
        self.trace = []

    @cached_property
    def coords(self):
        return semantic_coordinates(self.catalog.embeddings,
                                    derive_projection(self.key, self.catalog.d))

    def controller(self):
        ctrl = initial_controller(self.icfg, eta=self.cfg.eta, tau=self.cfg.tau,
                                  momentum=self.cfg.momentum)
        if not self.cfg.calibrate:
            return ctrl
        self.trace = []
        return calibrate(self.teacher, self.calib_histories, self.key, self.coords, self.pcfg,
                         self.icfg, ctrl, n_batches=self.cfg.calib_batches,
                         batch_size=self.cfg.calib_batch_size, trace=self.trace)

    def watermark(self, ctrl=None):
        if ctrl is None:
            ctrl = self.controller()
        return Watermark(key=self.key, coords=self.coords, pcfg=self.pcfg, icfg=self.icfg,
                         alpha_global=ctrl.alpha_global)

    def serve(self, watermark=None, scorer=None, K=None):
        scorer = self.teacher if scorer is None else scorer
        return recommend_all(scorer, self.test_histories, K or self.icfg.top_k, watermark)

    def evaluate(self, lists, key=None):
        key = self.key if key is None else key
        coords = self.coords if key is self.key else semantic_coordinates(
            self.catalog.embeddings, derive_projection(key, self.catalog.d))
        k = self.cfg.eval_k
        rep = verify(lists, key, coords, self.pcfg, threshold=self.cfg.threshold)
        return {
            f"recall@{k}": recall_at_k(lists, self.targets, k),
            f"ndcg@{k}": ndcg_at_k(lists, self.targets, k),
            "green_rate": green_hit_rate(lists, key, coords, self.pcfg),
            "z": rep.z_score,
            "report": rep,
        }

    def attack_queries(self):
        """Prefixes of real user sequences, for the replay attack.

        Every proper prefix of each user's training part, excluding the
        evaluation history itself.
        """
        seqs = self.log.sequences
        L = seqs.shape[1]
        return [row[:t].tolist() for row in seqs for t in range(1, L - 1)]

    def replay_logs(self, watermark, K):
        return recommend_all(self.teacher, self.attack_queries(), K, watermark)

    def synthetic_logs(self, watermark, K):
        """Data-free querying: random seed items grown by following the model's own answers.

        Each sequence starts at a uniform random item; at every step the
        attacker appends a uniformly chosen item from the returned Top-K.
        The attacker's choices of *position* are seeded independently of the
        model, so clean and watermarked runs share the same random stream.
        """
        rng = np.random.default_rng((self.cfg.seed + 2) & MASK64)
        n, L = self.cfg.attack_sequences, self.cfg.attack_length
        seqs = [[int(x)] for x in rng.integers(0, self.catalog.n_items, n)]
        logs = []
        for _ in range(L - 1):
            top = serve_topk(self.teacher, seqs, K, watermark)
            pick = rng.integers(0, K, n)
            for u, (s, row) in enumerate(zip(seqs, top)):
                logs.append(RecommendationList(user_id=u, history=tuple(s), items=row))
                s.append(int(row[pick[u]]))
        return logs

    def attack(self, watermark=None, K=None, mode=None):
        """Train a student on the deployed model's answers; return (student, student_lists)."""
        K = K or self.icfg.top_k
        mode = mode or self.cfg.attack_mode
        if mode == "synthetic":
            answers = self.synthetic_logs(watermark, K)
        elif mode == "replay":
            answers = self.replay_logs(watermark, K)
        else:
            raise ValueError(f"unknown attack mode {mode!r}")
        student = train_student(answers, self.catalog.n_items, self.cfg.student_smoothing)
        return student, self.serve(scorer=student, K=K)

    def agreement(self, teacher_lists, student_lists):
        return agreement_at_k(teacher_lists, student_lists, self.cfg.eval_k)
