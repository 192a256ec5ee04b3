/**
 * Service client. The interface is narrow so tests can substitute an
 * in-memory fake; the HTTP implementation mirrors the documented endpoints.
 */

import type { AgentMessage, Phase, TeacherKind, TeacherMessage } from "./protocol.js";
import type { LayoutDoc } from "./layoutModel.js";

export interface TutorDoc {
  id: string;
  name: string;
  version: number;
  layout: LayoutDoc;
  agent: unknown;
}

export interface MessageResponse {
  agent: AgentMessage | null;
  phase: Phase;
  legal: TeacherKind[];
}

export interface ApiClient {
  createTutor(name: string, layout: LayoutDoc): Promise<TutorDoc>;
  getTutor(id: string): Promise<TutorDoc>;
  updateTutor(id: string, version: number, layout: LayoutDoc): Promise<TutorDoc>;
  openSession(tutorId: string): Promise<{ session: string; phase: Phase; legal: TeacherKind[] }>;
  postMessage(sessionId: string, message: TeacherMessage): Promise<MessageResponse>;
  closeSession(sessionId: string): Promise<void>;
  evaluate(tutorId: string, domain: string, count: number, seed: number): Promise<unknown>;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly expected: string[] = [],
  ) {
    super(message);
  }
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 204) return undefined as T;
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(payload.error ?? response.statusText, response.status, payload.expected ?? []);
    }
    return payload as T;
  }

  createTutor(name: string, layout: LayoutDoc): Promise<TutorDoc> {
    return this.request("POST", "/tutors", { name, layout });
  }

  getTutor(id: string): Promise<TutorDoc> {
    return this.request("GET", `/tutors/${id}`);
  }

  updateTutor(id: string, version: number, layout: LayoutDoc): Promise<TutorDoc> {
    return this.request("PUT", `/tutors/${id}`, { version, layout });
  }

  openSession(tutorId: string): Promise<{ session: string; phase: Phase; legal: TeacherKind[] }> {
    return this.request("POST", `/tutors/${tutorId}/sessions`);
  }

  postMessage(sessionId: string, message: TeacherMessage): Promise<MessageResponse> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { message });
  }

  closeSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }

  evaluate(tutorId: string, domain: string, count: number, seed: number): Promise<unknown> {
    return this.request("POST", `/tutors/${tutorId}/evaluate`, { domain, count, seed });
  }
}
