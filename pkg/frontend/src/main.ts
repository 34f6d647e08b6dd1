// Entry point: camera permission, session connect, capture loop.

import { CaptureLoop, videoFrameGrabber } from "./capture.js";
import { SessionClient } from "./client.js";
import {
  appendTranscriptRow,
  renderStats,
  renderStatus,
  showToast,
  syncSliders,
  wireSliders,
} from "./ui.js";

const RECONNECT_DELAY_MS = 2000;

function sessionUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/session`;
}

async function start(): Promise<void> {
  const video = document.getElementById("preview") as HTMLVideoElement;

  let stream: MediaStream;
  try {
    stream = await navigator.mediaDevices.getUserMedia({
      video: { width: 640, height: 480 },
      audio: false,
    });
  } catch {
    renderStatus("error");
    showToast("Camera permission denied — recognition cannot start.");
    return;
  }
  video.srcObject = stream;
  await video.play();

  const client = new SessionClient({
    url: sessionUrl(),
    onGloss: () => {
      const row = client.state.transcript[client.state.transcript.length - 1];
      appendTranscriptRow(row);
    },
    onStats: renderStats,
    onConfigSettled: () => syncSliders(client),
    onConfigRejected: (_rejected, error) => {
      syncSliders(client); // revert to the acknowledged values
      showToast(`Rejected: ${error.detail}`);
    },
    onServerError: (error) => showToast(`${error.code}: ${error.detail}`),
    onStatusChange: (status) => {
      renderStatus(status);
      if (status === "open") syncSliders(client);
      if (status === "closed") {
        setTimeout(() => client.connect(), RECONNECT_DELAY_MS);
      }
    },
  });

  const capture = new CaptureLoop({
    grabFrame: videoFrameGrabber(video),
    send: (frame) => client.sendFrame(frame),
    bufferedAmount: () => client.bufferedAmount,
    onCameraLost: () => {
      client.close();
      renderStatus("closed");
      showToast("Camera stream ended — session closed.");
    },
  });

  wireSliders(client);
  client.connect();
  capture.start();
}

void start();
