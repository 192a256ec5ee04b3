/**
 * Entry point: load (or create) a tutor, mount the builder on the left and
 * the training view on the right.
 */

import { HttpApiClient } from "./api.js";
import { initialBuilderState, builderReduce } from "./builder.js";
import { BuilderView, TrainingView } from "./dom.js";
import { emptyLayout } from "./layoutModel.js";
import { initialTrainingState } from "./training.js";

async function boot(): Promise<void> {
  const api = new HttpApiClient("");
  const params = new URLSearchParams(window.location.search);
  let tutorId = params.get("tutor");
  if (tutorId === null) {
    const created = await api.createTutor("untitled tutor", emptyLayout());
    tutorId = created.id;
    params.set("tutor", tutorId);
    window.history.replaceState(null, "", `?${params.toString()}`);
  }
  const tutor = await api.getTutor(tutorId);

  const builderHost = document.getElementById("builder")!;
  const builderState = builderReduce(initialBuilderState(), {
    type: "load",
    layout: tutor.layout,
    tutorId: tutor.id,
    tutorVersion: tutor.version,
  });
  new BuilderView(builderHost, api, builderState);

  const trainingHost = document.getElementById("training")!;
  const opened = await api.openSession(tutor.id);
  const training = initialTrainingState();
  training.sessionId = opened.session;
  training.phase = opened.phase;
  new TrainingView(trainingHost, api, tutor.layout.root, training);
}

void boot();
