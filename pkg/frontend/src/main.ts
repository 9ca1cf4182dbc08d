import { ConsoleApp } from "./app";
import { BridgeClient } from "./client";

// The bridge binds 127.0.0.1:8765 unless the simulator was started with a
// different --bridge-port, which the operator passes along as ?port=.
function bridgeUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? "127.0.0.1";
  const port = params.get("port") ?? "8765";
  return `ws://${host}:${port}`;
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = new BridgeClient({ url: bridgeUrl() });
new ConsoleApp(root, client);
client.connect();
