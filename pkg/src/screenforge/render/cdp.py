"""DevTools-protocol page engine for a real headless browser.

Speaks flat-session CDP over the browser's websocket endpoint: one
isolated page target per job, the extraction script evaluated in-page
before a beyond-viewport screenshot. The browser process is relaunched
every RECYCLE_AFTER jobs to contain renderer leaks.
"""

from __future__ import annotations

import base64
import http.client
import json
import os
import re
import subprocess
import tempfile
import threading
import time
from importlib import resources
from pathlib import Path
from urllib.parse import urlparse

from . import wsproto
from .harness import (
    DETERMINISM_CSS,
    FROZEN_CLOCK_JS,
    BrowserCrashed,
    NavigationTimeout,
    ProtocolError,
    ScriptError,
)

RECYCLE_AFTER = 50
_WS_URL_RE = re.compile(r"DevTools listening on (ws://\S+)")


def extractor_script() -> str:
    """In-page extraction script; SCREENFORGE_EXTRACTOR swaps in an
    external build (e.g. the TypeScript implementation's dist file)."""
    override = os.environ.get("SCREENFORGE_EXTRACTOR")
    if override:
        return Path(override).read_text("utf-8")
    return resources.files("screenforge.render").joinpath("extractor.js").read_text("utf-8")


class CdpClient:
    """Request/response + event dispatch over one browser websocket."""

    def __init__(self, ws_url: str, timeout: float = 30.0):
        self.timeout = timeout
        self._ws = wsproto.connect(ws_url, timeout=timeout)
        self._lock = threading.Lock()
        self._cond = threading.Condition()
        self._next_id = 1
        self._replies: dict[int, dict] = {}
        self._events: list[dict] = []
        self._dead: str | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            while True:
                message = self._ws.recv_message()
                if message is None:
                    raise wsproto.WebSocketError("connection closed")
                parsed = json.loads(message)
                with self._cond:
                    if "id" in parsed:
                        self._replies[parsed["id"]] = parsed
                    else:
                        self._events.append(parsed)
                    self._cond.notify_all()
        except Exception as exc:
            with self._cond:
                self._dead = str(exc)
                self._cond.notify_all()

    def call(self, method: str, params: dict | None = None,
             session_id: str | None = None) -> dict:
        with self._lock:
            msg_id = self._next_id
            self._next_id += 1
        payload = {"id": msg_id, "method": method, "params": params or {}}
        if session_id:
            payload["sessionId"] = session_id
        self._ws.send_text(json.dumps(payload))
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while msg_id not in self._replies:
                if self._dead:
                    raise BrowserCrashed(f"browser connection lost: {self._dead}")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ProtocolError(f"timed out waiting for {method}")
                self._cond.wait(remaining)
            reply = self._replies.pop(msg_id)
        if "error" in reply:
            raise ProtocolError(f"{method}: {reply['error']}")
        return reply.get("result", {})

    def wait_event(self, method: str, session_id: str | None = None,
                   timeout: float | None = None) -> dict:
        deadline = time.monotonic() + (timeout or self.timeout)
        seen = 0
        with self._cond:
            while True:
                for i in range(seen, len(self._events)):
                    ev = self._events[i]
                    if ev.get("method") == method and (
                            session_id is None or ev.get("sessionId") == session_id):
                        return ev.get("params", {})
                seen = len(self._events)
                if self._dead:
                    raise BrowserCrashed(f"browser connection lost: {self._dead}")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise NavigationTimeout(f"no {method} event within timeout")
                self._cond.wait(remaining)

    def close(self) -> None:
        try:
            self._ws.close()
        except OSError:
            pass


def _browser_ws_url(http_endpoint: str, timeout: float = 10.0) -> str:
    """Resolve the browser websocket url via GET /json/version."""
    parsed = urlparse(http_endpoint)
    conn = http.client.HTTPConnection(parsed.hostname, parsed.port, timeout=timeout)
    try:
        conn.request("GET", "/json/version")
        body = conn.getresponse().read().decode()
    finally:
        conn.close()
    return json.loads(body)["webSocketDebuggerUrl"]


class CdpEngine:
    """Engine driving a browser binary (or an already-running endpoint)."""

    name = "cdp"

    def __init__(self, binary: str | None = None, endpoint: str | None = None,
                 timeout: float = 30.0):
        if binary is None and endpoint is None:
            raise ValueError("need a browser binary or a devtools endpoint")
        self.binary = binary
        self.endpoint = endpoint
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._client: CdpClient | None = None
        self._profile_dir: tempfile.TemporaryDirectory | None = None
        self._jobs_done = 0
        self._lock = threading.Lock()

    # --- lifecycle ---

    def _launch(self) -> CdpClient:
        if self.endpoint:
            url = self.endpoint
            if url.startswith("http"):
                url = _browser_ws_url(url, timeout=self.timeout)
            return CdpClient(url, timeout=self.timeout)
        self._profile_dir = tempfile.TemporaryDirectory(prefix="screenforge-chrome-")
        cmd = [
            self.binary, "--headless=new", "--remote-debugging-port=0",
            f"--user-data-dir={self._profile_dir.name}",
            "--no-first-run", "--no-sandbox", "--disable-gpu",
            "--hide-scrollbars", "--force-device-scale-factor=1",
            "--disable-lcd-text", "--font-render-hinting=none",
            "--lang=en-US", "about:blank",
        ]
        self._proc = subprocess.Popen(
            cmd, stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True)
        deadline = time.monotonic() + self.timeout
        url = None
        while time.monotonic() < deadline:
            line = self._proc.stderr.readline()
            if not line:
                if self._proc.poll() is not None:
                    raise BrowserCrashed(
                        f"browser exited at launch (code {self._proc.returncode})")
                continue
            m = _WS_URL_RE.search(line)
            if m:
                url = m.group(1)
                break
        if url is None:
            raise ProtocolError("browser never reported its devtools endpoint")
        return CdpClient(url, timeout=self.timeout)

    def _ensure_client(self) -> CdpClient:
        if self._client is None:
            self._client = self._launch()
        return self._client

    def _recycle_if_due(self) -> None:
        if self._proc is not None and self._jobs_done and \
                self._jobs_done % RECYCLE_AFTER == 0:
            self.close()

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None
        if self._proc is not None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None
        if self._profile_dir is not None:
            self._profile_dir.cleanup()
            self._profile_dir = None

    # --- rendering ---

    def render_page(self, document: str, viewport: tuple[int, int],
                    full_page: bool, values: dict, settings: dict | None = None):
        with self._lock:
            self._recycle_if_due()
            client = self._ensure_client()
            try:
                out = self._render_once(
                    client, document, viewport, full_page, values,
                    settings or {})
            except BrowserCrashed:
                self.close()
                raise
            self._jobs_done += 1
            return out

    def _render_once(self, client: CdpClient, document, viewport, full_page,
                     values, settings):
        if self._proc is not None and self._proc.poll() is not None:
            raise BrowserCrashed(f"browser died (code {self._proc.returncode})")
        target = client.call("Target.createTarget", {"url": "about:blank"})
        session = client.call(
            "Target.attachToTarget",
            {"targetId": target["targetId"], "flatten": True})["sessionId"]
        try:
            client.call("Page.enable", session_id=session)
            client.call("Runtime.enable", session_id=session)
            client.call("Emulation.setDeviceMetricsOverride", {
                "width": viewport[0], "height": viewport[1],
                "deviceScaleFactor": 1, "mobile": False}, session_id=session)
            clock_ms = int(settings.get("clock_ms", 1700000000000))
            client.call("Page.addScriptToEvaluateOnNewDocument",
                        {"source": FROZEN_CLOCK_JS % clock_ms},
                        session_id=session)
            doc = f"<style>{DETERMINISM_CSS}</style>" + document
            url = "data:text/html;charset=utf-8;base64," + base64.b64encode(
                doc.encode("utf-8")).decode("ascii")
            client.call("Page.navigate", {"url": url}, session_id=session)
            client.wait_event("Page.loadEventFired", session_id=session)

            metrics = client.call("Page.getLayoutMetrics", session_id=session)
            content = metrics.get("cssContentSize") or metrics.get("contentSize", {})
            height = viewport[1]
            if full_page:
                height = max(int(content.get("height", viewport[1])), viewport[1])
                # grow the emulated viewport so in-page hit testing reaches
                # below the original fold
                client.call("Emulation.setDeviceMetricsOverride", {
                    "width": viewport[0], "height": height,
                    "deviceScaleFactor": 1, "mobile": False}, session_id=session)

            expression = (extractor_script()
                          + f"\n__sf_extract({json.dumps(values, sort_keys=True)})")
            evaluated = client.call("Runtime.evaluate", {
                "expression": expression, "returnByValue": True,
            }, session_id=session)
            if "exceptionDetails" in evaluated:
                raise ScriptError(
                    f"extractor threw: {evaluated['exceptionDetails'].get('text')}"
                    f" {evaluated['exceptionDetails'].get('exception', {}).get('description', '')}")
            payload = json.loads(evaluated["result"]["value"])

            shot = client.call("Page.captureScreenshot", {
                "format": "png", "captureBeyondViewport": True,
                "clip": {"x": 0, "y": 0, "width": viewport[0],
                         "height": height, "scale": 1},
            }, session_id=session)
            image = base64.b64decode(shot["data"])
            return image, (viewport[0], height), payload
        finally:
            try:
                client.call("Target.closeTarget", {"targetId": target["targetId"]})
            except (ProtocolError, BrowserCrashed):
                pass
