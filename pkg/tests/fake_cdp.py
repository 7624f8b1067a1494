"""In-process DevTools protocol double for exercising the CDP engine.

Serves /json/version over HTTP and a websocket speaking the protocol
subset the engine uses. Page semantics (layout, extraction, screenshots)
are delegated to the built-in engine, so the protocol client is tested
end to end without a browser binary.

Failure injection knobs: drop_connection_on, no_load_event, evaluate_throws.
"""

from __future__ import annotations

import base64
import json
import socket
import threading

from screenforge.htmldoc import parse_html
from screenforge.render import wsproto
from screenforge.render.builtin import BuiltinEngine, paint
from screenforge.render.extract import extract_annotations
from screenforge.render.simdom import PageLayout

def _values_from_expression(expression: str) -> dict:
    """The engine appends `__sf_extract({...})` as the final line."""
    call = expression.rstrip().rsplit("__sf_extract(", 1)[1]
    return json.loads(call[:-1])


class FakeCdpServer:
    def __init__(self, no_load_event=False, evaluate_throws=False,
                 drop_connection_on=None):
        self.no_load_event = no_load_event
        self.evaluate_throws = evaluate_throws
        self.drop_connection_on = drop_connection_on
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(8)
        self.port = self.sock.getsockname()[1]
        self.calls: list[str] = []
        self._threads: list[threading.Thread] = []
        self._running = True
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def close(self) -> None:
        self._running = False
        try:
            self.sock.close()
        except OSError:
            pass

    # --- connection handling ---

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket) -> None:
        try:
            peek = conn.recv(65536, socket.MSG_PEEK)
            if b"Upgrade: websocket" in peek or b"upgrade: websocket" in peek:
                self._serve_ws(wsproto.accept(conn))
            else:
                conn.recv(65536)
                body = json.dumps({
                    "webSocketDebuggerUrl":
                        f"ws://127.0.0.1:{self.port}/devtools/browser/fake"})
                conn.sendall(
                    b"HTTP/1.1 200 OK\r\nContent-Type: application/json\r\n"
                    + f"Content-Length: {len(body)}\r\n\r\n{body}".encode())
                conn.close()
        except (OSError, wsproto.WebSocketError):
            pass

    # --- protocol ---

    def _serve_ws(self, ws: wsproto.WebSocket) -> None:
        state: dict = {"targets": {}, "sessions": {}, "next": 1}
        while True:
            message = ws.recv_message()
            if message is None:
                return
            request = json.loads(message)
            method = request.get("method", "")
            self.calls.append(method)
            if method == self.drop_connection_on:
                ws._sock.close()
                return
            reply = {"id": request["id"]}
            if "sessionId" in request:
                reply["sessionId"] = request["sessionId"]
            reply["result"] = self._dispatch(ws, state, request)
            ws.send_text(json.dumps(reply))

    def _dispatch(self, ws, state, request) -> dict:
        method = request.get("method")
        params = request.get("params", {})
        session = request.get("sessionId")
        if method == "Target.createTarget":
            tid = f"target-{state['next']}"
            state["next"] += 1
            state["targets"][tid] = {"doc": "", "viewport": (1400, 900)}
            return {"targetId": tid}
        if method == "Target.attachToTarget":
            sid = f"session-{params['targetId']}"
            state["sessions"][sid] = state["targets"][params["targetId"]]
            return {"sessionId": sid}
        if method == "Target.closeTarget":
            return {"success": True}
        if method in ("Page.enable", "Runtime.enable",
                      "Page.addScriptToEvaluateOnNewDocument"):
            return {}
        if method == "Emulation.setDeviceMetricsOverride":
            state["sessions"][session]["viewport"] = (params["width"], params["height"])
            return {}
        if method == "Page.navigate":
            url = params["url"]
            assert url.startswith("data:text/html;charset=utf-8;base64,")
            doc = base64.b64decode(url.split(",", 1)[1]).decode("utf-8")
            state["sessions"][session]["doc"] = doc
            if not self.no_load_event:
                ws.send_text(json.dumps({
                    "method": "Page.loadEventFired", "sessionId": session,
                    "params": {"timestamp": 1.0}}))
            return {"frameId": "frame-1"}
        if method == "Page.getLayoutMetrics":
            page = state["sessions"][session]
            layout = PageLayout(parse_html(page["doc"]), page["viewport"][0])
            return {"cssContentSize": {
                "width": page["viewport"][0],
                "height": max(int(layout.page_height), 1)}}
        if method == "Runtime.evaluate":
            if self.evaluate_throws:
                return {"result": {"type": "undefined"},
                        "exceptionDetails": {"text": "boom"}}
            page = state["sessions"][session]
            values = _values_from_expression(params["expression"])
            layout = PageLayout(parse_html(page["doc"]), page["viewport"][0])
            payload = extract_annotations(layout, values)
            return {"result": {"type": "string",
                               "value": json.dumps(payload)}}
        if method == "Page.captureScreenshot":
            page = state["sessions"][session]
            clip = params["clip"]
            layout = PageLayout(parse_html(page["doc"]), page["viewport"][0])
            image = paint(layout, int(clip["width"]), int(clip["height"]))
            return {"data": base64.b64encode(image).decode("ascii")}
        raise AssertionError(f"fake server got unexpected method {method}")
