"""Run the remote oracle against a throwaway local endpoint.

Starts a tiny chat-completions server in a background thread that answers
from the ground-truth labels of a planted dataset, then clusters through it
twice: the second run is served entirely from the response cache.

    python3 demos/remote_stub.py
"""

import json
import re
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from clusterwalk import (
    PlantedSpec,
    RemoteOracle,
    RetryPolicy,
    TraversalConfig,
    build_graph,
    generate_dataset,
    nmi,
    run_clustering,
)

spec = PlantedSpec(n_nodes=40, n_classes=3, dimension=12, noise_sigma=0.05, seed=3,
                   min_prototype_separation=0.1)
records, _ = generate_dataset(spec)
labels = {r.id: r.label for r in records}


class LabelHandler(BaseHTTPRequestHandler):
    """Reads the node ids out of the prompt attachments and votes by label."""

    def do_POST(self):
        payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        parts = payload["messages"][0]["content"]
        ids = []
        for part in parts[1:]:  # first part is the prompt text
            m = re.fullmatch(r"\[attachment (.+)\]", part["text"])
            if m:
                ids.append(m.group(1))
        classes = {labels[i] for i in ids}
        verdict = "YES" if len(classes) == 1 else "NO"
        body = json.dumps({"choices": [{"message": {
            "content": f"<CONCLUSION> {verdict} </CONCLUSION>"}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), LabelHandler)
threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05},
                 daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
print(f"stub endpoint: {endpoint}")

g = build_graph(records, tau=0.6)
with tempfile.TemporaryDirectory() as tmp:
    cache = Path(tmp) / "oracle_cache.jsonl"
    config = TraversalConfig(k=3, seed=0, aspect="class identity")

    oracle = RemoteOracle(endpoint, "label-stub", cache_path=cache, api_key="demo",
                          retry=RetryPolicy(max_attempts=2, backoff_base=0.05))
    clusters, trace = run_clustering(g, oracle, config)
    queries = trace.membership_assessments + trace.merge_assessments
    cached = sum(1 for _ in cache.open())
    print(f"first run: {len(clusters)} clusters from {queries} queries, "
          f"{cached} cache entries, NMI {nmi([c.members for c in clusters], labels):.3f}")

    # same cache, fresh oracle: every query is a cache hit, no HTTP at all
    replay = RemoteOracle(endpoint, "label-stub", cache_path=cache, api_key="demo")
    clusters2, trace2 = run_clustering(g, replay, config)
    same = [sorted(c.members) for c in clusters] == [sorted(c.members) for c in clusters2]
    print(f"replay run: identical partition: {same}")

server.shutdown()
server.server_close()
